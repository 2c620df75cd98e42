#include "nlmilp/structure.hpp"

#include <algorithm>
#include <set>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"

namespace nlmilp::structure {

namespace ju = json_util;

namespace {

std::string text_or_lines(const json& j, const std::string& key, const std::string& path) {
  const json& v = ju::require(j, key, path);
  if (v.is_string()) return v.get<std::string>();
  if (!v.is_array()) ju::violation(path + "/" + key, "expected string or array of lines");
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) ju::violation(path + "/" + key + "/" + std::to_string(i), "expected string");
    if (i) out += '\n';
    out += v[i].get<std::string>();
  }
  return out;
}

}  // namespace

StructurePool StructurePool::from_json(const json& j, const std::string& origin) {
  StructurePool pool;
  ju::expect_object(j, origin, {"structures"});
  const json& list = ju::get_array(j, "structures", origin);
  std::set<ir::AnnotationKind> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::string path = origin + "/structures/" + std::to_string(i);
    ju::expect_object(list[i], path, {"kind", "candidates", "definition", "example", "question"});
    StructureTemplate t;
    auto kind = ir::annotation_kind_from_string(ju::get_string(list[i], "kind", path));
    if (!kind) ju::violation(path + "/kind", "unknown structure kind");
    if (!seen.insert(*kind).second) ju::violation(path + "/kind", "kind listed twice");
    t.kind = *kind;
    std::string cand = ju::get_string_or(list[i], "candidates", path, "any");
    if (cand != "any" && cand != "binary") ju::violation(path + "/candidates", "expected any or binary");
    t.needs_binary = cand == "binary";
    t.definition = text_or_lines(list[i], "definition", path);
    t.example = text_or_lines(list[i], "example", path);
    t.question = text_or_lines(list[i], "question", path);
    pool.templates_.push_back(std::move(t));
  }
  return pool;
}

StructurePool StructurePool::load(const std::filesystem::path& path) {
  return from_json(ju::read_file(path), path.filename().string());
}

const StructurePool& default_pool() {
  static StructurePool pool = StructurePool::load(llm::data_dir() / "prompts" / "structures.json");
  return pool;
}

json proposal_to_json(const StructureProposal& p) {
  return {{"kind", std::string(ir::to_string(p.kind))}, {"targets", p.targets}, {"annotation", p.annotation},
          {"confidence", p.confidence}};
}

std::vector<std::string> candidate_clauses(const State& state, const StructureTemplate& tmpl) {
  std::vector<std::string> out;
  for (const auto& c : state.clauses()) {
    if (c.kind != ClauseKind::kConstraint || c.status == ClauseStatus::kExtracted) continue;
    if (tmpl.needs_binary) {
      bool binary = false;
      for (const auto& s : state.graph().neighbors_of_clause(c.id)) {
        const Variable* v = state.find_variable(s);
        binary = binary || (v && v->type == VarType::kBinary);
      }
      if (!binary) continue;
    }
    out.push_back(c.id);
  }
  return out;
}

std::vector<StructureProposal> detect_structures(const State& state, const StructurePool& pool,
                                                 llm::Backend& backend, EventLog& log, int retries,
                                                 const std::string& stage) {
  std::vector<StructureProposal> proposals;
  llm::PromptTemplate tmpl = llm::default_templates().get("detect_structure");
  std::string symbols = llm::describe_symbols(ClauseContext{state.parameters(), state.variables()});
  for (const StructureTemplate& st : pool.templates()) {
    auto ids = candidate_clauses(state, st);
    if (ids.empty()) continue;
    std::string clauses;
    for (const auto& id : ids) {
      const Clause& c = state.clause(id);
      clauses += id + ": " + c.description + "\n    " + c.formulation + "\n";
    }
    std::string kind(ir::to_string(st.kind));
    llm::Prompt p = llm::make_prompt(tmpl,
                                     {{"kind", kind}, {"definition", st.definition}, {"example", st.example},
                                      {"question", st.question}, {"clauses", clauses}, {"symbols", symbols}},
                                     kind);
    auto validator = [](const json& payload) {
      if (!payload.is_object() || !payload.contains("proposals") || !payload["proposals"].is_array()) {
        throw Error(ErrorCode::kInvalidPayload, "expected {\"proposals\": [...]}");
      }
      for (const auto& item : payload["proposals"]) {
        if (!item.is_object() || !item.contains("targets") || !item["targets"].is_array() ||
            !item.contains("annotation") || !item["annotation"].is_string()) {
          throw Error(ErrorCode::kInvalidPayload, "each proposal needs targets and annotation");
        }
        for (const auto& t : item["targets"]) {
          if (!t.is_string()) throw Error(ErrorCode::kInvalidPayload, "targets must be clause ids");
        }
      }
    };
    try {
      llm::LlmResponse r = llm::complete(backend, p, validator, retries);
      log.add(stage, "llm", kind, "ok", {{"template", "detect_structure"}, {"retries", r.retry_count}},
              p.fingerprint);
      for (const auto& item : r.payload["proposals"]) {
        StructureProposal sp;
        sp.kind = st.kind;
        for (const auto& t : item["targets"]) sp.targets.push_back(t.get<std::string>());
        sp.annotation = item["annotation"].get<std::string>();
        llm::LlmResponse one;
        one.payload = item;
        sp.confidence = llm::confidence_of(one);
        proposals.push_back(std::move(sp));
      }
    } catch (const Error& e) {
      log.add(stage, "warning", kind, std::string(e.code_name()), {{"message", e.what()}}, p.fingerprint);
    }
  }
  return proposals;
}

Verdict verify_proposal(const State& state, const StructureProposal& proposal) {
  auto reject = [](std::string why) { return Verdict{false, std::move(why)}; };
  if (proposal.targets.empty()) return reject("no target clauses");
  std::set<std::string> seen;
  for (const auto& id : proposal.targets) {
    const Clause* c = state.find_clause(id);
    if (c == nullptr) return reject("unknown clause '" + id + "'");
    if (c->kind != ClauseKind::kConstraint) return reject("'" + id + "' is not a constraint");
    if (!seen.insert(id).second) return reject("'" + id + "' listed twice");
  }
  std::vector<ir::Statement> statements;
  try {
    statements = ir::parse_statements(proposal.annotation, ir::symbols_of(state));
  } catch (const Error& e) {
    return reject(e.what());
  }
  int matching = 0;
  for (const auto& s : statements) {
    if (std::holds_alternative<ir::IRObjective>(s)) return reject("annotation contains an objective");
    if (const auto* a = std::get_if<ir::StructureAnnotation>(&s)) {
      if (a->kind != proposal.kind) {
        return reject(std::string("annotation is ") + std::string(ir::to_string(a->kind)) + ", not " +
                      std::string(ir::to_string(proposal.kind)));
      }
      ++matching;
    }
  }
  if (matching == 0) return reject(std::string("no ") + std::string(ir::to_string(proposal.kind)) + " annotation");

  ir::Fragment objective{"__objective", "", {ir::IRObjective{}}};
  ir::Fragment body{proposal.targets.front(), proposal.annotation, statements};
  GroundModel model;
  try {
    model = ir::ground({objective, body}, state);
  } catch (const Error& e) {
    return reject(e.what());
  }
  for (const SosSet& set : model.sos) {
    std::vector<std::size_t> forced;
    for (std::size_t k = 0; k < set.cols.size(); ++k) {
      if (model.lower[set.cols[k]] > 0.0) forced.push_back(k);
    }
    bool bad = set.type == 1 ? forced.size() > 1 : forced.size() > 2 || (forced.size() == 2 && forced[1] != forced[0] + 1);
    if (bad) return reject("SOS '" + set.name + "' members are forced nonzero by their bounds");
  }
  return Verdict{true, ""};
}

void apply_proposal(State& state, const StructureProposal& proposal, EventLog* log, const std::string& stage) {
  std::vector<std::string> touched;
  for (const auto& id : proposal.targets) {
    for (const auto& s : state.graph().neighbors_of_clause(id)) {
      if (std::find(touched.begin(), touched.end(), s) == touched.end()) touched.push_back(s);
    }
  }
  const std::string& keep = proposal.targets.front();
  Clause& c = state.clause(keep);
  c.formulation = proposal.annotation;
  c.fragment.reset();
  c.status = ClauseStatus::kFormulated;
  state.disconnect_clause(keep);
  for (const auto& s : ir::referenced_symbols(proposal.annotation, ir::symbols_of(state))) state.connect(keep, s);
  for (std::size_t i = 1; i < proposal.targets.size(); ++i) state.remove_clause(proposal.targets[i]);
  std::vector<std::string> dropped;
  for (const auto& s : touched) {
    if (state.find_variable(s) && state.graph().clauses_of_symbol(s).empty()) {
      state.remove_symbol(s);
      dropped.push_back(s);
    }
  }
  if (log) {
    log->add(stage, "structure", keep, "applied",
             {{"proposal", proposal_to_json(proposal)}, {"dropped_variables", dropped}});
  }
}

std::string_view to_string(ProblemClass cls) {
  switch (cls) {
    case ProblemClass::kTSP: return "TSP";
    case ProblemClass::kSAT: return "SAT";
    case ProblemClass::kNetworkFlow: return "NetworkFlow";
    case ProblemClass::kRouting: return "Routing";
    case ProblemClass::kRegression: return "Regression";
    case ProblemClass::kNone: return "None";
  }
  return "None";
}

std::optional<ProblemClass> problem_class_from_string(std::string_view text) {
  for (auto c : {ProblemClass::kTSP, ProblemClass::kSAT, ProblemClass::kNetworkFlow, ProblemClass::kRouting,
                 ProblemClass::kRegression, ProblemClass::kNone}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

json advisory_to_json(const ProblemClassAdvisory& a) {
  json j = {{"class", std::string(to_string(a.cls))}, {"rationale", a.rationale}, {"solver", a.solver}};
  if (!a.warning.empty()) j["warning"] = a.warning;
  return j;
}

ProblemClassAdvisory classify_problem(const std::string& description, llm::Backend& backend, int retries) {
  ProblemClassAdvisory out;
  llm::Prompt p = llm::make_prompt(llm::default_templates().get("classify_problem"), {{"description", description}}, "*");
  auto validator = [](const json& payload) {
    if (!payload.is_object() || !payload.contains("class") || !payload["class"].is_string() ||
        !problem_class_from_string(payload["class"].get<std::string>())) {
      throw Error(ErrorCode::kInvalidPayload, "class must be one of TSP, SAT, NetworkFlow, Routing, Regression, None");
    }
  };
  try {
    llm::LlmResponse r = llm::complete(backend, p, validator, retries);
    out.cls = *problem_class_from_string(r.payload["class"].get<std::string>());
    out.rationale = r.payload.value("rationale", "");
    out.solver = r.payload.value("solver", "");
  } catch (const Error& e) {
    out.cls = ProblemClass::kNone;
    out.warning = e.what();
  }
  return out;
}

}  // namespace nlmilp::structure
