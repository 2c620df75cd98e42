#include "nlmilp/error_correction.hpp"

#include <algorithm>

#include "nlmilp/error.hpp"
#include "nlmilp/ir.hpp"
#include "nlmilp/json_util.hpp"

namespace nlmilp::ec {

namespace ju = json_util;

std::string_view to_string(ReflectStage stage) {
  switch (stage) {
    case ReflectStage::kParamExtraction: return "ParamExtraction";
    case ReflectStage::kClauseExtraction: return "ClauseExtraction";
    case ReflectStage::kClauseModeling: return "ClauseModeling";
    case ReflectStage::kVariableCheck: return "VariableCheck";
  }
  return "?";
}

ReflectStage reflect_stage_from_string(std::string_view text) {
  for (auto s : {ReflectStage::kParamExtraction, ReflectStage::kClauseExtraction, ReflectStage::kClauseModeling,
                 ReflectStage::kVariableCheck}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown reflection stage '" + std::string(text) + "'");
}

namespace {

ReflectTarget target_from_string(const std::string& text, const std::string& path) {
  if (text == "parameter") return ReflectTarget::kParameter;
  if (text == "constraint") return ReflectTarget::kConstraint;
  if (text == "clause") return ReflectTarget::kClause;
  if (text == "clause_list") return ReflectTarget::kClauseList;
  if (text == "variable") return ReflectTarget::kVariable;
  ju::violation(path, "unknown target '" + text + "'");
}

const std::vector<std::string> kKnownActions = {"to_variable", "to_parameter", "remove", "rewrite"};

}  // namespace

ReflectionRegistry ReflectionRegistry::from_json(const json& j, const std::string& origin) {
  ReflectionRegistry reg;
  ju::expect_object(j, origin, {"prompts"});
  const json& list = ju::get_array(j, "prompts", origin);
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::string path = origin + "/prompts/" + std::to_string(i);
    const json& item = list[i];
    ju::expect_object(item, path, {"id", "stage", "target", "actions", "body"});
    ReflectivePrompt p;
    p.id = ju::get_string(item, "id", path);
    for (const auto& other : reg.prompts_) {
      if (other.id == p.id) ju::violation(path + "/id", "duplicate prompt id '" + p.id + "'");
    }
    try {
      p.stage = reflect_stage_from_string(ju::get_string(item, "stage", path));
    } catch (const Error&) {
      ju::violation(path + "/stage", "unknown stage");
    }
    p.target = target_from_string(ju::get_string(item, "target", path), path + "/target");
    const json& actions = ju::get_array(item, "actions", path);
    for (std::size_t k = 0; k < actions.size(); ++k) {
      if (!actions[k].is_string() ||
          std::find(kKnownActions.begin(), kKnownActions.end(), actions[k].get<std::string>()) == kKnownActions.end()) {
        ju::violation(path + "/actions/" + std::to_string(k), "unknown action");
      }
      p.actions.push_back(actions[k].get<std::string>());
    }
    json tmpl = {{"name", p.id}, {"stage", std::string(to_string(p.stage))}, {"body", item.at("body")}};
    p.tmpl = llm::TemplateRegistry::from_json(json{{"templates", json::array({tmpl})}}, path).get(p.id);
    reg.prompts_.push_back(std::move(p));
  }
  return reg;
}

ReflectionRegistry ReflectionRegistry::load(const std::filesystem::path& path) {
  return from_json(ju::read_file(path), path.filename().string());
}

std::vector<const ReflectivePrompt*> ReflectionRegistry::for_stage(ReflectStage stage) const {
  std::vector<const ReflectivePrompt*> out;
  for (const auto& p : prompts_) {
    if (p.stage == stage) out.push_back(&p);
  }
  return out;
}

const ReflectionRegistry& default_reflection() {
  static ReflectionRegistry reg = ReflectionRegistry::load(llm::data_dir() / "prompts" / "reflection.json");
  return reg;
}

namespace {

std::string shape_text(const Shape& shape) {
  if (shape.empty()) return "(scalar)";
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += dim_to_string(shape[i]);
  }
  return s + "]";
}

std::string problem_text(const State& state) {
  return state.description().empty() ? state.background() : state.description();
}

std::string all_symbols(const State& state) {
  return llm::describe_symbols(ClauseContext{state.parameters(), state.variables()});
}

// Coded clauses touching `symbol` lose their code.
void stale_code_of(State& state, const std::string& symbol) {
  for (const auto& cid : state.graph().clauses_of_symbol(symbol)) {
    Clause& c = state.clause(cid);
    if (c.status == ClauseStatus::kCoded) {
      c.status = ClauseStatus::kFormulated;
      c.fragment.reset();
    }
  }
}

void relink(State& state, const std::string& clause_id, const std::string& text) {
  auto symbols = ir::referenced_symbols(text, ir::symbols_of(state));
  state.disconnect_clause(clause_id);
  for (const auto& s : symbols) state.connect(clause_id, s);
}

void set_formulation(State& state, const std::string& clause_id, const std::string& formulation) {
  Clause& c = state.clause(clause_id);
  c.formulation = formulation;
  c.fragment.reset();
  c.status = ClauseStatus::kFormulated;
  relink(state, clause_id, formulation);
}

VarType parse_type(const json& v, const std::string& where) {
  if (!v.is_string()) throw Error(ErrorCode::kInvalidPayload, where + ": type must be a string");
  try {
    return var_type_from_string(v.get<std::string>());
  } catch (const Error&) {
    throw Error(ErrorCode::kInvalidPayload, where + ": unknown variable type '" + v.get<std::string>() + "'");
  }
}

void check_verdict(const ReflectivePrompt& prompt, const State& state, const json& payload) {
  if (!payload.is_object()) throw Error(ErrorCode::kInvalidPayload, "verdict must be an object");
  auto v = payload.find("verdict");
  if (v == payload.end() || !v->is_string()) throw Error(ErrorCode::kInvalidPayload, "missing \"verdict\"");
  if (*v == "ok") return;
  if (*v != "revise") throw Error(ErrorCode::kInvalidPayload, "verdict must be ok or revise");
  auto a = payload.find("action");
  if (a == payload.end() || !a->is_string()) throw Error(ErrorCode::kInvalidPayload, "revise needs \"action\"");
  std::string action = a->get<std::string>();
  if (std::find(prompt.actions.begin(), prompt.actions.end(), action) == prompt.actions.end()) {
    throw Error(ErrorCode::kInvalidPayload, "action '" + action + "' is not allowed for " + prompt.id);
  }
  if (action == "to_variable") {
    parse_type(payload.value("type", json("Continuous")), prompt.id);
  } else if (action == "rewrite") {
    auto f = payload.find("formulation");
    if (f == payload.end() || !f->is_string() || f->get<std::string>().empty()) {
      throw Error(ErrorCode::kInvalidPayload, "rewrite needs a non-empty \"formulation\"");
    }
  } else if (action == "remove" && prompt.target == ReflectTarget::kClauseList) {
    auto t = payload.find("targets");
    if (t == payload.end() || !t->is_array()) throw Error(ErrorCode::kInvalidPayload, "remove needs \"targets\"");
    for (const auto& id : *t) {
      if (!id.is_string()) throw Error(ErrorCode::kInvalidPayload, "targets must be clause ids");
      const Clause* c = state.find_clause(id.get<std::string>());
      if (c == nullptr) throw Error(ErrorCode::kInvalidPayload, "unknown clause '" + id.get<std::string>() + "'");
      if (c->kind == ClauseKind::kObjective) throw Error(ErrorCode::kInvalidPayload, "the objective cannot be removed");
    }
  }
}

struct Item {
  std::string id;
  llm::Bindings bindings;
};

std::vector<Item> items_for(const State& state, const ReflectivePrompt& prompt) {
  std::vector<Item> items;
  std::string desc = problem_text(state);
  switch (prompt.target) {
    case ReflectTarget::kParameter:
      for (const auto& p : state.parameters()) {
        items.push_back({p.symbol, {{"description", desc}, {"symbol", p.symbol}, {"shape", shape_text(p.shape)},
                                    {"definition", p.definition}}});
      }
      break;
    case ReflectTarget::kVariable:
      for (const auto& v : state.variables()) {
        items.push_back({v.symbol, {{"description", desc}, {"symbol", v.symbol}, {"shape", shape_text(v.shape)},
                                    {"definition", v.definition}, {"type", std::string(to_string(v.type))}}});
      }
      break;
    case ReflectTarget::kConstraint:
    case ReflectTarget::kClause: {
      std::string syms = all_symbols(state);
      for (const auto& c : state.clauses()) {
        if (prompt.target == ReflectTarget::kConstraint && c.kind != ClauseKind::kConstraint) continue;
        items.push_back({c.id, {{"description", desc}, {"id", c.id}, {"clause", c.description},
                                {"kind", c.kind == ClauseKind::kObjective ? "Objective" : "Constraint"},
                                {"formulation", c.formulation}, {"symbols", syms}}});
      }
      break;
    }
    case ReflectTarget::kClauseList: {
      std::string list;
      for (const auto& c : state.clauses()) {
        if (c.kind == ClauseKind::kConstraint) list += c.id + ": " + c.description + "\n";
      }
      if (!list.empty()) items.push_back({"*", {{"description", desc}, {"clauses", list}}});
      break;
    }
  }
  return items;
}

// Returns a short description of the change, empty for ok.
std::string apply_verdict(State& state, const ReflectivePrompt& prompt, const std::string& item, const json& v) {
  if (v.at("verdict") == "ok") return "";
  std::string action = v.at("action");
  if (action == "to_variable") {
    VarType type = parse_type(v.value("type", json("Continuous")), prompt.id);
    state.parameter_to_variable(item, type);
    stale_code_of(state, item);
    return "parameter " + item + " -> " + std::string(to_string(type)) + " variable";
  }
  if (action == "to_parameter") {
    state.variable_to_parameter(item);
    stale_code_of(state, item);
    return "variable " + item + " -> parameter";
  }
  if (action == "rewrite") {
    set_formulation(state, item, v.at("formulation").get<std::string>());
    return "rewrote " + item;
  }
  if (action == "remove") {
    std::vector<std::string> ids;
    if (prompt.target == ReflectTarget::kClauseList) {
      for (const auto& id : v.at("targets")) ids.push_back(id.get<std::string>());
    } else {
      if (state.clause(item).kind == ClauseKind::kObjective) {
        throw Error(ErrorCode::kInvalidPayload, "the objective cannot be removed");
      }
      ids.push_back(item);
    }
    std::string what = "removed";
    for (const auto& id : ids) {
      if (state.find_clause(id) == nullptr) continue;  // already gone
      state.remove_clause(id);
      what += " " + id;
    }
    return what;
  }
  throw Error(ErrorCode::kInvalidPayload, "unknown action " + action);
}

}  // namespace

int reflect(State& state, ReflectStage stage, const ReflectionRegistry& registry, llm::Backend& backend,
            EventLog& log, const ReflectOptions& options) {
  std::string tag = options.stage_tag.empty() ? std::string(to_string(stage)) : options.stage_tag;
  int changes = 0;
  for (int pass = 0; pass < std::max(1, options.passes); ++pass) {
    int pass_changes = 0;
    for (const ReflectivePrompt* prompt : registry.for_stage(stage)) {
      for (const Item& item : items_for(state, *prompt)) {
        // An earlier verdict in this pass may have moved or removed the item.
        bool present = item.id == "*" || state.find_clause(item.id) != nullptr ||
                       (prompt->target == ReflectTarget::kParameter && state.find_parameter(item.id)) ||
                       (prompt->target == ReflectTarget::kVariable && state.find_variable(item.id));
        if (!present) continue;
        llm::Prompt p = llm::make_prompt(prompt->tmpl, item.bindings, item.id);
        auto validator = [&](const json& payload) { check_verdict(*prompt, state, payload); };
        llm::LlmResponse r = llm::complete(backend, p, validator, options.retries);
        log.add(tag, "llm", item.id, "ok", {{"template", prompt->id}, {"retries", r.retry_count}}, p.fingerprint);
        std::string change = apply_verdict(state, *prompt, item.id, r.payload);
        if (!change.empty()) {
          ++pass_changes;
          log.add(tag, "correction", item.id, r.payload.value("action", ""),
                  {{"prompt", prompt->id}, {"change", change}}, p.fingerprint);
        }
      }
    }
    changes += pass_changes;
    if (pass_changes == 0) break;
  }
  return changes;
}

std::string_view to_string(Route route) {
  switch (route) {
    case Route::kUser: return "User";
    case Route::kStrongBackend: return "StrongBackend";
    case Route::kOff: return "Off";
  }
  return "?";
}

Route route_from_string(std::string_view text) {
  for (auto r : {Route::kUser, Route::kStrongBackend, Route::kOff}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown escalation route '" + std::string(text) + "'");
}

std::string_view to_string(FeedbackAction action) {
  switch (action) {
    case FeedbackAction::kKeep: return "keep";
    case FeedbackAction::kRemove: return "remove";
    case FeedbackAction::kModify: return "modify";
  }
  return "?";
}

FeedbackAction feedback_action_from_string(std::string_view text) {
  for (auto a : {FeedbackAction::kKeep, FeedbackAction::kRemove, FeedbackAction::kModify}) {
    if (to_string(a) == text) return a;
  }
  throw Error(ErrorCode::kInvalidPayload, "action must be keep, remove or modify");
}

std::string_view to_string(Author author) { return author == Author::kHuman ? "Human" : "StrongBackend"; }

json pending_review_to_json(const PendingReview& r) {
  return {{"id", r.id}, {"target", r.target}, {"stage", r.stage}, {"confidence", r.confidence},
          {"content", r.content}, {"response", r.response}};
}

PendingReview pending_review_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"id", "target", "stage", "confidence", "content", "response"});
  PendingReview r;
  r.id = ju::get_string(j, "id", path);
  r.target = ju::get_string(j, "target", path);
  r.stage = ju::get_string_or(j, "stage", path, "");
  r.confidence = static_cast<int>(ju::get_int(j, "confidence", path));
  r.content = ju::get_string_or(j, "content", path, "");
  r.response = ju::get_string_or(j, "response", path, "");
  return r;
}

bool should_escalate(std::optional<int> confidence, const EscalationPolicy& policy) {
  int c = confidence && *confidence >= 1 && *confidence <= 5 ? *confidence : 1;
  return c < policy.threshold;
}

EscalationOutcome escalate(const EscalationItem& item, std::optional<int> confidence,
                           const EscalationPolicy& policy, llm::Backend* strong, int retries) {
  if (policy.threshold < 1 || policy.threshold > 5) {
    throw Error(ErrorCode::kInvalidArgument, "escalation threshold must be in 1..5");
  }
  EscalationOutcome out;
  out.decision.target = item.target;
  out.decision.action = FeedbackAction::kKeep;
  if (!should_escalate(confidence, policy)) return out;
  out.escalated = true;
  int c = confidence && *confidence >= 1 && *confidence <= 5 ? *confidence : 1;
  PendingReview review{item.stage + ":" + item.target, item.target, item.stage, c, item.content, item.response};
  if (policy.route == Route::kOff) return out;
  if (policy.route == Route::kUser || strong == nullptr) {
    out.review = review;
    return out;
  }
  llm::Prompt p = llm::make_prompt(llm::default_templates().get("review_item"),
                                   {{"description", item.description}, {"item", item.target},
                                    {"content", item.content}, {"response", item.response}},
                                   item.target);
  auto validator = [](const json& payload) {
    if (!payload.is_object() || !payload.contains("action") || !payload["action"].is_string()) {
      throw Error(ErrorCode::kInvalidPayload, "missing \"action\"");
    }
    FeedbackAction a = feedback_action_from_string(payload["action"].get<std::string>());
    if (a == FeedbackAction::kModify && !(payload.contains("payload") && payload["payload"].is_object())) {
      throw Error(ErrorCode::kInvalidPayload, "modify needs a \"payload\" object");
    }
  };
  out.queried = true;
  try {
    llm::LlmResponse r = llm::complete(*strong, p, validator, retries);
    out.decision.action = feedback_action_from_string(r.payload["action"].get<std::string>());
    out.decision.payload = r.payload.value("payload", json::object());
    out.decision.author = Author::kStrongBackend;
  } catch (const Error&) {
    out.decision.action = FeedbackAction::kKeep;
    out.review = review;
  }
  return out;
}

namespace {

enum class TargetKind { kClause, kParameter, kVariable };

TargetKind kind_of(const State& state, const std::string& target) {
  if (state.find_clause(target)) return TargetKind::kClause;
  switch (state.symbol_kind(target)) {
    case SymbolKind::kParameter: return TargetKind::kParameter;
    case SymbolKind::kVariable: return TargetKind::kVariable;
    case SymbolKind::kNone: break;
  }
  throw Error(ErrorCode::kUnknownTarget, "no clause or symbol named '" + target + "'");
}

void need_string(const json& payload, const char* key) {
  if (payload.contains(key) && !payload[key].is_string()) {
    throw Error(ErrorCode::kInvalidPayload, std::string("\"") + key + "\" must be a string");
  }
}

void check_keys(const json& payload, std::initializer_list<const char*> keys) {
  if (!payload.is_object()) throw Error(ErrorCode::kInvalidPayload, "payload must be an object");
  if (payload.empty()) throw Error(ErrorCode::kInvalidPayload, "payload is empty");
  for (const auto& item : payload.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || item.key() == k;
    if (!ok) throw Error(ErrorCode::kInvalidPayload, "unexpected field \"" + item.key() + "\"");
  }
}

Shape payload_shape(const json& payload) {
  try {
    return shape_from_json(payload.at("shape"), "/shape");
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidPayload, e.what());
  }
}

}  // namespace

void validate_feedback(const State& state, const FeedbackDecision& d) {
  TargetKind kind = kind_of(state, d.target);
  if (d.action != FeedbackAction::kModify) return;
  const json& p = d.payload;
  switch (kind) {
    case TargetKind::kClause:
      check_keys(p, {"description", "formulation", "code"});
      need_string(p, "description");
      need_string(p, "formulation");
      need_string(p, "code");
      if (p.contains("code")) {
        try {
          ir::build_fragment(state.clause(d.target), p["code"].get<std::string>(), ir::symbols_of(state));
        } catch (const Error& e) {
          throw Error(ErrorCode::kInvalidPayload, std::string("code does not build: ") + e.what());
        }
      }
      break;
    case TargetKind::kParameter:
      check_keys(p, {"definition", "shape", "values"});
      need_string(p, "definition");
      if (p.contains("shape")) payload_shape(p);
      if (p.contains("values")) {
        try {
          tensor_from_json(p["values"], "/values");
        } catch (const Error& e) {
          throw Error(ErrorCode::kInvalidPayload, e.what());
        }
      }
      break;
    case TargetKind::kVariable:
      check_keys(p, {"definition", "shape", "type", "bounds"});
      need_string(p, "definition");
      if (p.contains("shape")) payload_shape(p);
      if (p.contains("type")) parse_type(p["type"], "type");
      if (p.contains("bounds")) {
        const json& b = p["bounds"];
        if (!(b.is_null() || (b.is_array() && b.size() == 2))) {
          throw Error(ErrorCode::kInvalidPayload, "bounds must be [lower, upper] or null");
        }
      }
      break;
  }
}

void apply_feedback(State& state, const FeedbackDecision& d, EventLog* log, const std::string& stage) {
  validate_feedback(state, d);
  if (d.action == FeedbackAction::kKeep) {
    if (Clause* c = state.find_clause(d.target)) c->low_confidence = false;
    if (log) log->add(stage, "feedback", d.target, "keep", {{"author", std::string(to_string(d.author))}});
    return;
  }
  TargetKind kind = kind_of(state, d.target);
  State next = state;  // all-or-nothing
  if (d.action == FeedbackAction::kRemove) {
    if (kind == TargetKind::kClause) {
      next.remove_clause(d.target);
    } else {
      for (const auto& cid : next.graph().clauses_of_symbol(d.target)) {
        Clause& c = next.clause(cid);
        c.status = ClauseStatus::kExtracted;
        c.fragment.reset();
      }
      next.remove_symbol(d.target);
    }
  } else {
    const json& p = d.payload;
    if (kind == TargetKind::kClause) {
      Clause& c = next.clause(d.target);
      c.low_confidence = false;
      if (p.contains("description")) {
        c.description = p["description"].get<std::string>();
        c.status = ClauseStatus::kExtracted;
        c.fragment.reset();
      }
      if (p.contains("formulation")) set_formulation(next, d.target, p["formulation"].get<std::string>());
      if (p.contains("code")) {
        Clause& cc = next.clause(d.target);
        cc.fragment = p["code"].get<std::string>();
        cc.status = ClauseStatus::kCoded;
        auto frag = ir::build_fragment(cc, *cc.fragment, ir::symbols_of(next));
        for (const auto& s : ir::fragment_symbols(frag)) next.connect(d.target, s);
      }
    } else if (kind == TargetKind::kParameter) {
      // Shape edits go through remove + add so the symbol checks run again.
      const Parameter* old = next.find_parameter(d.target);
      Parameter updated = *old;
      if (p.contains("definition")) updated.definition = p["definition"].get<std::string>();
      if (p.contains("shape")) updated.shape = payload_shape(p);
      if (!(updated == *old)) {
        auto edges = next.graph().clauses_of_symbol(d.target);
        std::optional<Tensor> data;
        if (const Tensor* t = next.find_data(d.target); t && updated.shape == old->shape) data = *t;
        next.remove_symbol(d.target);
        next.add_parameter(updated);
        for (const auto& cid : edges) next.connect(cid, d.target);
        if (data) next.bind_data(d.target, *data);
      }
      if (p.contains("values")) next.bind_data(d.target, tensor_from_json(p["values"], "/values"));
      stale_code_of(next, d.target);
    } else {
      Variable* v = next.find_variable(d.target);
      Variable updated = *v;
      if (p.contains("definition")) updated.definition = p["definition"].get<std::string>();
      if (p.contains("shape")) updated.shape = payload_shape(p);
      if (p.contains("type")) updated.type = parse_type(p["type"], "type");
      if (p.contains("bounds")) {
        if (p["bounds"].is_null()) {
          updated.bounds.reset();
        } else {
          updated.bounds = Bounds{ju::number_from_json(p["bounds"][0], "/bounds/0"),
                                  ju::number_from_json(p["bounds"][1], "/bounds/1")};
        }
      }
      auto edges = next.graph().clauses_of_symbol(d.target);
      next.remove_symbol(d.target);
      next.add_variable(updated);
      for (const auto& cid : edges) next.connect(cid, d.target);
      stale_code_of(next, d.target);
    }
  }
  next.validate();
  state = std::move(next);
  if (log) {
    log->add(stage, "feedback", d.target, std::string(to_string(d.action)),
             {{"author", std::string(to_string(d.author))}, {"payload", d.payload}});
  }
}

}  // namespace nlmilp::ec
