#include "nlmilp/pipeline.hpp"

#include <algorithm>
#include <regex>

#include "nlmilp/error.hpp"
#include "nlmilp/ir.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/structure.hpp"

namespace nlmilp::pipeline {

namespace ju = json_util;

namespace {

const Stage kStages[] = {Stage::kExtractParams, Stage::kExtractClauses, Stage::kFormulate, Stage::kCode,
                         Stage::kAssemble,      Stage::kSolveDebug,     Stage::kDone};

std::string tag(Stage s) { return std::string(to_string(s)); }

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kExtractParams: return "ExtractParams";
    case Stage::kExtractClauses: return "ExtractClauses";
    case Stage::kFormulate: return "Formulate";
    case Stage::kCode: return "Code";
    case Stage::kAssemble: return "Assemble";
    case Stage::kSolveDebug: return "SolveDebug";
    case Stage::kDone: return "Done";
  }
  return "?";
}

Stage stage_from_string(std::string_view text) {
  for (Stage s : kStages) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// config

RunConfig run_config_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"backend", "strong_backend", "escalation", "error_correction", "debug",
                              "repair_infeasible", "retries", "structure_detection", "classify", "solver",
                              "big_m"});
  RunConfig c;
  // Without a backend the pipeline fails when it first needs one.
  if (j.contains("backend")) c.backend = llm::backend_spec_from_json(j["backend"], path + "/backend");
  if (j.contains("strong_backend") && !j["strong_backend"].is_null()) {
    c.strong_backend = llm::backend_spec_from_json(j["strong_backend"], path + "/strong_backend");
    c.strong_backend->tier = llm::Tier::kStrong;
  }
  if (j.contains("escalation")) {
    const json& e = j["escalation"];
    std::string p = path + "/escalation";
    ju::expect_object(e, p, {"threshold", "route"});
    if (e.contains("threshold")) c.escalation.threshold = static_cast<int>(ju::get_int(e, "threshold", p));
    if (c.escalation.threshold < 1 || c.escalation.threshold > 5) ju::violation(p + "/threshold", "must be in 1..5");
    if (e.contains("route")) {
      try {
        c.escalation.route = ec::route_from_string(ju::get_string(e, "route", p));
      } catch (const Error&) {
        ju::violation(p + "/route", "expected User, StrongBackend or Off");
      }
    }
  }
  if (j.contains("error_correction")) {
    const json& e = j["error_correction"];
    std::string p = path + "/error_correction";
    ju::expect_object(e, p, {"extraction", "modeling", "passes"});
    c.extraction_ec = ju::get_bool_or(e, "extraction", p, true);
    c.modeling_ec = ju::get_bool_or(e, "modeling", p, true);
    if (e.contains("passes")) c.reflect_passes = static_cast<int>(ju::get_int(e, "passes", p));
    if (c.reflect_passes < 1) ju::violation(p + "/passes", "must be >= 1");
  }
  if (j.contains("debug")) {
    const json& d = j["debug"];
    std::string p = path + "/debug";
    ju::expect_object(d, p, {"enabled", "max_attempts"});
    c.debug = ju::get_bool_or(d, "enabled", p, true);
    if (d.contains("max_attempts")) c.max_debug_attempts = static_cast<int>(ju::get_int(d, "max_attempts", p));
    if (c.max_debug_attempts < 1) ju::violation(p + "/max_attempts", "must be >= 1");
  }
  c.repair_infeasible = ju::get_bool_or(j, "repair_infeasible", path, false);
  if (j.contains("retries")) c.retries = static_cast<int>(ju::get_int(j, "retries", path));
  if (c.retries < 0) ju::violation(path + "/retries", "must be >= 0");
  c.structure_detection = ju::get_bool_or(j, "structure_detection", path, true);
  c.classify = ju::get_bool_or(j, "classify", path, true);
  if (j.contains("solver")) {
    const json& s = j["solver"];
    std::string p = path + "/solver";
    ju::expect_object(s, p, {"engine", "time_limit", "mip_gap", "presolve"});
    c.engine = ju::get_string_or(s, "engine", p, "simplex");
    if (s.contains("time_limit")) c.solver.time_limit = ju::get_number(s, "time_limit", p);
    if (s.contains("mip_gap")) c.solver.mip_gap = ju::get_number(s, "mip_gap", p);
    c.solver.presolve = ju::get_bool_or(s, "presolve", p, true);
  }
  if (j.contains("big_m")) c.big_m = ju::get_number(j, "big_m", path);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["backend"] = llm::backend_spec_to_json(c.backend);
  if (c.strong_backend) j["strong_backend"] = llm::backend_spec_to_json(*c.strong_backend);
  j["escalation"] = {{"threshold", c.escalation.threshold}, {"route", std::string(ec::to_string(c.escalation.route))}};
  j["error_correction"] = {{"extraction", c.extraction_ec}, {"modeling", c.modeling_ec}, {"passes", c.reflect_passes}};
  j["debug"] = {{"enabled", c.debug}, {"max_attempts", c.max_debug_attempts}};
  j["repair_infeasible"] = c.repair_infeasible;
  j["retries"] = c.retries;
  j["structure_detection"] = c.structure_detection;
  j["classify"] = c.classify;
  j["solver"] = {{"engine", c.engine}, {"time_limit", c.solver.time_limit}, {"mip_gap", c.solver.mip_gap},
                 {"presolve", c.solver.presolve}};
  j["big_m"] = c.big_m;
  return j;
}

// ---------------------------------------------------------------------------
// outcome / run persistence

json outcome_to_json(const SolveOutcome& o) {
  json j = {{"status", std::string(nlmilp::to_string(o.status))}};
  j["objective"] = o.objective ? json(*o.objective) : json(nullptr);
  json primal = json::object();
  for (const auto& [k, v] : o.primal) primal[k] = v;
  j["primal"] = primal;
  j["diagnostics"] = o.diagnostics;
  return j;
}

SolveOutcome outcome_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"status", "objective", "primal", "diagnostics"});
  SolveOutcome o;
  std::string status = ju::get_string(j, "status", path);
  bool found = false;
  for (auto s : {SolveStatus::kOptimal, SolveStatus::kInfeasible, SolveStatus::kUnbounded, SolveStatus::kError,
                 SolveStatus::kTimeLimit}) {
    if (nlmilp::to_string(s) == status) {
      o.status = s;
      found = true;
    }
  }
  if (!found) ju::violation(path + "/status", "unknown status");
  if (j.contains("objective") && !j["objective"].is_null()) o.objective = ju::get_number(j, "objective", path);
  if (j.contains("primal")) {
    for (const auto& item : j["primal"].items()) o.primal[item.key()] = item.value().get<double>();
  }
  o.diagnostics = ju::get_string_or(j, "diagnostics", path, "");
  return o;
}

json run_to_json(const PipelineRun& run) {
  json j;
  j["project"] = run.project;
  j["cursor"] = tag(run.cursor);
  j["debug_attempts"] = run.debug_attempts;
  json data = json::object();
  for (const auto& [k, t] : run.supplied_data) data[k] = tensor_to_nested(t);
  j["supplied_data"] = data;
  j["reviews"] = json::array();
  for (const auto& r : run.reviews) j["reviews"].push_back(ec::pending_review_to_json(r));
  j["notifications"] = run.notifications;
  j["failure"] = run.failure ? json(*run.failure) : json(nullptr);
  j["outcome"] = run.outcome ? outcome_to_json(*run.outcome) : json(nullptr);
  return j;
}

PipelineRun run_from_json(const json& j) {
  const std::string path = "run";
  ju::expect_object(j, path, {"project", "cursor", "debug_attempts", "supplied_data", "reviews", "notifications",
                              "failure", "outcome"});
  PipelineRun run;
  run.project = ju::get_string_or(j, "project", path, "");
  try {
    run.cursor = stage_from_string(ju::get_string(j, "cursor", path));
  } catch (const Error&) {
    ju::violation(path + "/cursor", "unknown stage");
  }
  if (j.contains("debug_attempts")) run.debug_attempts = static_cast<int>(ju::get_int(j, "debug_attempts", path));
  if (j.contains("supplied_data")) {
    for (const auto& item : j["supplied_data"].items()) {
      run.supplied_data[item.key()] = tensor_from_nested(item.value(), path + "/supplied_data/" + item.key());
    }
  }
  if (j.contains("reviews")) {
    const json& list = ju::get_array(j, "reviews", path);
    for (std::size_t i = 0; i < list.size(); ++i) {
      run.reviews.push_back(ec::pending_review_from_json(list[i], path + "/reviews/" + std::to_string(i)));
    }
  }
  if (j.contains("notifications")) {
    for (const auto& n : ju::get_array(j, "notifications", path)) run.notifications.push_back(n);
  }
  if (j.contains("failure") && !j["failure"].is_null()) run.failure = ju::get_string(j, "failure", path);
  if (j.contains("outcome") && !j["outcome"].is_null()) run.outcome = outcome_from_json(j["outcome"], path + "/outcome");
  return run;
}

namespace {

void nested_shape(const json& j, std::size_t depth, std::vector<std::int64_t>& shape, std::vector<double>& out,
                  const std::string& path) {
  if (j.is_number()) {
    if (depth != shape.size()) throw Error(ErrorCode::kShapeMismatch, path + ": ragged nesting");
    out.push_back(j.get<double>());
    return;
  }
  if (j.is_string()) {
    out.push_back(ju::number_from_json(j, path));
    if (depth != shape.size()) throw Error(ErrorCode::kShapeMismatch, path + ": ragged nesting");
    return;
  }
  if (!j.is_array()) throw Error(ErrorCode::kSchemaViolation, path + ": expected number or array");
  if (depth == shape.size()) {
    if (!out.empty()) throw Error(ErrorCode::kShapeMismatch, path + ": ragged nesting");
    shape.push_back(static_cast<std::int64_t>(j.size()));
  } else if (shape[depth] != static_cast<std::int64_t>(j.size())) {
    throw Error(ErrorCode::kShapeMismatch, path + ": ragged nesting");
  }
  for (std::size_t i = 0; i < j.size(); ++i) nested_shape(j[i], depth + 1, shape, out, path + "/" + std::to_string(i));
}

}  // namespace

Tensor tensor_from_nested(const json& j, const std::string& path) {
  Tensor t;
  nested_shape(j, 0, t.shape, t.values, path);
  if (t.values.size() != t.element_count()) throw Error(ErrorCode::kShapeMismatch, path + ": ragged nesting");
  return t;
}

json tensor_to_nested(const Tensor& t) {
  if (t.shape.empty()) return ju::number_to_json(t.values.at(0));
  std::function<json(std::size_t, std::size_t&)> build = [&](std::size_t axis, std::size_t& pos) {
    json a = json::array();
    for (std::int64_t i = 0; i < t.shape[axis]; ++i) {
      if (axis + 1 == t.shape.size()) {
        a.push_back(ju::number_to_json(t.values[pos++]));
      } else {
        a.push_back(build(axis + 1, pos));
      }
    }
    return a;
  };
  std::size_t pos = 0;
  return build(0, pos);
}

// ---------------------------------------------------------------------------

namespace {

const std::regex kSymbolRe("^[A-Za-z][A-Za-z0-9_]*$");

std::string problem_text(const State& state) {
  return state.description().empty() ? state.background() : state.description();
}

std::string all_symbols(const State& state) {
  return llm::describe_symbols(ClauseContext{state.parameters(), state.variables()});
}

std::string fresh_symbol(const State& state, const std::string& base) {
  for (int k = 2;; ++k) {
    std::string s = base + "_" + std::to_string(k);
    if (!state.has_symbol(s) && state.find_clause(s) == nullptr) return s;
  }
}

Shape shape_of(const json& j, const std::string& path) {
  try {
    return shape_from_json(j, path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidPayload, e.what());
  }
}

void check_symbol_list(const json& list, const std::string& what, bool typed) {
  if (!list.is_array()) throw Error(ErrorCode::kInvalidPayload, "\"" + what + "\" must be a list");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& p = list[i];
    std::string where = what + "[" + std::to_string(i) + "]";
    if (!p.is_object()) throw Error(ErrorCode::kInvalidPayload, where + " must be an object");
    if (!p.contains("symbol") || !p["symbol"].is_string() ||
        !std::regex_match(p["symbol"].get<std::string>(), kSymbolRe)) {
      throw Error(ErrorCode::kInvalidPayload, where + " needs a symbol made of letters, digits and _");
    }
    if (p.contains("shape")) shape_of(p["shape"], "/" + where + "/shape");
    if (p.contains("definition") && !p["definition"].is_string()) {
      throw Error(ErrorCode::kInvalidPayload, where + ".definition must be a string");
    }
    if (typed && p.contains("type")) {
      if (!p["type"].is_string()) throw Error(ErrorCode::kInvalidPayload, where + ".type must be a string");
      try {
        var_type_from_string(p["type"].get<std::string>());
      } catch (const Error&) {
        throw Error(ErrorCode::kInvalidPayload, where + ".type must be Continuous, Integer or Binary");
      }
    }
  }
}

std::string describe_failure(const Error& e, const std::string& where = "") {
  std::string s = std::string(e.code_name()) + ": ";
  if (!where.empty()) s += where + ": ";
  return s + e.what();
}

}  // namespace

Pipeline::Pipeline(RunConfig config, llm::Backend& backend, llm::Backend* strong)
    : config_(std::move(config)), backend_(backend), strong_(strong) {}

void Pipeline::run_stage(State& state, PipelineRun& run, Stage stage) {
  if (stage == Stage::kDone) throw Error(ErrorCode::kStagePrecondition, "Done is not a runnable stage");
  if (run.cursor != stage) {
    if (static_cast<int>(run.cursor) > static_cast<int>(stage)) {
      throw Error(ErrorCode::kStagePrecondition,
                  "stage precondition: " + tag(stage) + " is already done (next stage is " + tag(run.cursor) + ")");
    }
    throw Error(ErrorCode::kStagePrecondition,
                "stage precondition: " + tag(stage) + " needs " + tag(run.cursor) + " to run first");
  }
  run.log.add(tag(stage), "stage", "", "start");
  try {
    switch (stage) {
      case Stage::kExtractParams:
        extract_parameters(state, run);
        break;
      case Stage::kExtractClauses:
        extract_clauses(state, run);
        break;
      case Stage::kFormulate: {
        std::vector<std::string> ids;
        for (const auto& c : state.clauses()) {
          if (c.status == ClauseStatus::kExtracted) ids.push_back(c.id);
        }
        for (const auto& id : ids) {
          if (state.find_clause(id)) formulate_clause(state, run, id);
        }
        if (config_.modeling_ec) {
          ec::ReflectOptions opt{config_.reflect_passes, config_.retries, tag(Stage::kFormulate)};
          ec::reflect(state, ec::ReflectStage::kClauseModeling, ec::default_reflection(), backend_, run.log, opt);
          ec::reflect(state, ec::ReflectStage::kVariableCheck, ec::default_reflection(), backend_, run.log, opt);
        }
        if (config_.structure_detection) detect_structures(state, run);
        break;
      }
      case Stage::kCode: {
        std::vector<std::string> ids;
        for (const auto& c : state.clauses()) {
          if (c.status == ClauseStatus::kFormulated) ids.push_back(c.id);
        }
        for (const auto& id : ids) code_clause(state, run, id);
        break;
      }
      case Stage::kAssemble:
        assemble(state, run);
        break;
      case Stage::kSolveDebug:
        solve(state, run);
        if (run.failure && config_.debug) {
          try {
            debug_loop(state, run);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kDebugExhausted) throw;
            run.outcome = SolveOutcome{SolveStatus::kError, std::nullopt, {}, describe_failure(e)};
            run.log.add(tag(stage), "error", "", std::string(e.code_name()),
                        {{"message", e.what()}, {"attempts", run.debug_attempts}});
          }
        } else if (run.failure) {
          run.outcome = SolveOutcome{SolveStatus::kError, std::nullopt, {}, *run.failure};
          if (run.model) {
            // Infeasible / Unbounded flagged for repair keep their status.
            if (run.outcome && run.failure->rfind("Infeasible", 0) == 0) run.outcome->status = SolveStatus::kInfeasible;
            if (run.outcome && run.failure->rfind("Unbounded", 0) == 0) run.outcome->status = SolveStatus::kUnbounded;
          }
        }
        break;
      case Stage::kDone:
        break;
    }
  } catch (const Error& e) {
    run.log.add(tag(stage), "error", "", std::string(e.code_name()), {{"message", e.what()}});
    throw;
  }
  state.validate();
  run.cursor = static_cast<Stage>(static_cast<int>(stage) + 1);
  run.log.add(tag(stage), "stage", "", "done");
}

SolveOutcome Pipeline::run_all(State& state, PipelineRun& run) {
  while (run.cursor != Stage::kDone) run_stage(state, run, run.cursor);
  return run.outcome.value_or(SolveOutcome{});
}

// ---------------------------------------------------------------------------
// ExtractParams

void Pipeline::extract_parameters(State& state, PipelineRun& run) {
  const std::string st = tag(Stage::kExtractParams);
  std::string desc = problem_text(state);
  if (config_.classify) {
    auto advisory = structure::classify_problem(desc, backend_, config_.retries);
    json note = {{"kind", "advisory"}, {"advisory", structure::advisory_to_json(advisory)}};
    run.notifications.push_back(note);
    run.log.add(st, "advisory", "", std::string(structure::to_string(advisory.cls)), note["advisory"]);
  }
  llm::Prompt p = llm::make_prompt(llm::default_templates().get("extract_parameters"), {{"description", desc}}, "*");
  auto validator = [](const json& payload) {
    if (!payload.is_object() || !payload.contains("parameters")) {
      throw Error(ErrorCode::kInvalidPayload, "expected {\"parameters\": [...]}");
    }
    check_symbol_list(payload["parameters"], "parameters", false);
  };
  llm::LlmResponse r = llm::complete(backend_, p, validator, config_.retries);
  run.log.add(st, "llm", "*", "ok", {{"template", "extract_parameters"}, {"retries", r.retry_count}}, p.fingerprint);

  std::vector<std::pair<std::string, json>> values;
  for (const auto& item : r.payload["parameters"]) {
    Parameter param;
    param.symbol = item["symbol"].get<std::string>();
    param.shape = item.contains("shape") ? shape_of(item["shape"], "/shape") : Shape{};
    param.definition = item.value("definition", "");
    if (state.has_symbol(param.symbol)) {
      std::string renamed = fresh_symbol(state, param.symbol);
      run.log.add(st, "correction", param.symbol, "renamed", {{"from", param.symbol}, {"to", renamed}});
      param.symbol = renamed;
    }
    try {
      state.add_parameter(param);
    } catch (const Error& e) {
      run.log.add(st, "warning", param.symbol, std::string(e.code_name()), {{"message", e.what()}});
      continue;
    }
    if (item.contains("value") && !item["value"].is_null()) values.emplace_back(param.symbol, item["value"]);
  }
  // Values only after every parameter exists, so named dimensions resolve.
  for (const auto& [symbol, value] : values) {
    try {
      state.bind_data(symbol, tensor_from_nested(value, "/" + symbol));
    } catch (const Error& e) {
      run.log.add(st, "warning", symbol, std::string(e.code_name()), {{"message", e.what()}});
    }
  }
  for (const auto& [symbol, tensor] : run.supplied_data) {
    if (!state.find_parameter(symbol)) {
      run.log.add(st, "data", symbol, "unused");
      continue;
    }
    state.bind_data(symbol, tensor);
    run.log.add(st, "data", symbol, "bound");
  }
  if (ec::should_escalate(r.confidence, config_.escalation)) {
    run.log.add(st, "escalation", "*", std::string(ec::to_string(config_.escalation.route)),
                {{"confidence", llm::confidence_of(r)}});
    if (config_.escalation.route != ec::Route::kOff) {
      run.reviews.push_back({st + ":parameters", "parameters", st, llm::confidence_of(r), all_symbols(state), r.raw});
    }
  }
  if (config_.extraction_ec) {
    ec::ReflectOptions opt{config_.reflect_passes, config_.retries, st};
    ec::reflect(state, ec::ReflectStage::kParamExtraction, ec::default_reflection(), backend_, run.log, opt);
  }
}

// ---------------------------------------------------------------------------
// ExtractClauses

void Pipeline::extract_clauses(State& state, PipelineRun& run) {
  const std::string st = tag(Stage::kExtractClauses);
  std::string params;
  for (const auto& prm : state.parameters()) params += llm::describe_parameter(prm) + "\n";
  if (params.empty()) params = "(none)\n";
  llm::Prompt p = llm::make_prompt(llm::default_templates().get("extract_clauses"),
                                   {{"description", problem_text(state)}, {"parameters", params}}, "*");
  auto validator = [](const json& payload) {
    if (!payload.is_object() || !payload.contains("clauses") || !payload["clauses"].is_array()) {
      throw Error(ErrorCode::kInvalidPayload, "expected {\"clauses\": [...]}");
    }
    int objectives = 0;
    for (const auto& c : payload["clauses"]) {
      if (!c.is_object() || !c.contains("kind") || !c.contains("description") || !c["description"].is_string()) {
        throw Error(ErrorCode::kInvalidPayload, "each clause needs kind and description");
      }
      if (c["kind"] == "objective") {
        ++objectives;
      } else if (c["kind"] != "constraint") {
        throw Error(ErrorCode::kInvalidPayload, "clause kind must be objective or constraint");
      }
    }
    if (objectives == 0) throw Error(ErrorCode::kNoObjectiveFound, "no objective clause in the reply");
  };
  // One repair re-ask for a missing objective.
  llm::LlmResponse r = llm::complete(backend_, p, validator, std::min(config_.retries, 1));
  run.log.add(st, "llm", "*", "ok", {{"template", "extract_clauses"}, {"retries", r.retry_count}}, p.fingerprint);
  int objectives = 0;
  for (const auto& c : r.payload["clauses"]) objectives += c["kind"] == "objective";
  if (objectives > 1) {
    throw Error(ErrorCode::kObjectiveConflict,
                "the reply lists " + std::to_string(objectives) + " objectives; exactly one is allowed");
  }
  for (const auto& item : r.payload["clauses"]) {
    Clause c;
    c.id = state.next_clause_id();
    c.kind = item["kind"] == "objective" ? ClauseKind::kObjective : ClauseKind::kConstraint;
    c.description = item["description"].get<std::string>();
    int conf = llm::confidence_of(r);
    c.confidence = conf;
    state.add_clause(c);
  }
  if (ec::should_escalate(r.confidence, config_.escalation)) {
    run.log.add(st, "escalation", "*", std::string(ec::to_string(config_.escalation.route)),
                {{"confidence", llm::confidence_of(r)}});
    for (const auto& c : state.clauses()) state.clause(c.id).low_confidence = true;
    if (config_.escalation.route != ec::Route::kOff) {
      run.reviews.push_back({st + ":clauses", "clauses", st, llm::confidence_of(r), "", r.raw});
    }
  }
  if (config_.extraction_ec) {
    ec::ReflectOptions opt{config_.reflect_passes, config_.retries, st};
    ec::reflect(state, ec::ReflectStage::kClauseExtraction, ec::default_reflection(), backend_, run.log, opt);
  }
}

// ---------------------------------------------------------------------------
// Formulate

void Pipeline::formulate_clause(State& state, PipelineRun& run, const std::string& clause_id) {
  const std::string st = tag(Stage::kFormulate);
  const Clause& clause = state.clause(clause_id);
  llm::Prompt p = llm::make_prompt(
      llm::default_templates().get("formulate_clause"),
      {{"description", problem_text(state)}, {"clause", clause.description},
       {"kind", clause.kind == ClauseKind::kObjective ? "objective" : "constraint"}, {"symbols", all_symbols(state)}},
      clause_id);
  auto validator = [&](const json& payload) {
    if (!payload.is_object() || !payload.contains("formulation") || !payload["formulation"].is_string() ||
        payload["formulation"].get<std::string>().empty()) {
      throw Error(ErrorCode::kInvalidPayload, "expected a non-empty \"formulation\"");
    }
    ir::SymbolTable table = ir::symbols_of(state);
    if (payload.contains("new_variables")) {
      check_symbol_list(payload["new_variables"], "new_variables", true);
      for (const auto& v : payload["new_variables"]) {
        ir::SymbolInfo info;
        info.kind = SymbolKind::kVariable;
        info.shape = v.contains("shape") ? shape_of(v["shape"], "/shape") : Shape{};
        table.emplace(v["symbol"].get<std::string>(), info);
      }
    }
    if (ir::referenced_symbols(payload["formulation"].get<std::string>(), table).empty()) {
      throw Error(ErrorCode::kUnknownSymbol, "the formulation references no known parameter or variable");
    }
  };
  llm::LlmResponse r = llm::complete(backend_, p, validator, config_.retries);
  run.log.add(st, "llm", clause_id, "ok", {{"template", "formulate_clause"}, {"retries", r.retry_count}},
              p.fingerprint);

  if (r.payload.contains("new_variables")) {
    for (const auto& item : r.payload["new_variables"]) {
      Variable v;
      v.symbol = item["symbol"].get<std::string>();
      v.shape = item.contains("shape") ? shape_of(item["shape"], "/shape") : Shape{};
      v.definition = item.value("definition", "");
      v.type = var_type_from_string(item.value("type", "Continuous"));
      if (item.contains("bounds") && item["bounds"].is_array() && item["bounds"].size() == 2) {
        v.bounds = Bounds{ju::number_from_json(item["bounds"][0], "/bounds/0"),
                          ju::number_from_json(item["bounds"][1], "/bounds/1")};
      }
      if (state.find_variable(v.symbol)) continue;  // declared by an earlier clause
      if (state.has_symbol(v.symbol) || state.find_clause(v.symbol)) {
        std::string renamed = fresh_symbol(state, v.symbol);
        run.log.add(st, "correction", v.symbol, "renamed", {{"from", v.symbol}, {"to", renamed}});
        v.symbol = renamed;
      }
      state.add_variable(v);
      run.log.add(st, "variable", v.symbol, "added", {{"clause", clause_id}});
    }
  }
  std::string formulation = r.payload["formulation"].get<std::string>();
  state.disconnect_clause(clause_id);
  for (const auto& s : ir::referenced_symbols(formulation, ir::symbols_of(state))) state.connect(clause_id, s);
  Clause& c = state.clause(clause_id);
  c.formulation = formulation;
  c.fragment.reset();
  c.status = ClauseStatus::kFormulated;
  c.confidence = llm::confidence_of(r);
  c.low_confidence = false;
  escalate_clause(state, run, clause_id, r);
}

void Pipeline::escalate_clause(State& state, PipelineRun& run, const std::string& clause_id,
                               const llm::LlmResponse& response) {
  const std::string st = tag(Stage::kFormulate);
  if (!ec::should_escalate(response.confidence, config_.escalation)) return;
  const Clause& c = state.clause(clause_id);
  ec::EscalationItem item{clause_id, st, problem_text(state), c.description + "\n" + c.formulation, response.raw};
  auto out = ec::escalate(item, response.confidence, config_.escalation, strong_, config_.retries);
  run.log.add(st, "escalation", clause_id, std::string(ec::to_string(config_.escalation.route)),
              {{"confidence", llm::confidence_of(response)},
               {"decision", std::string(ec::to_string(out.decision.action))},
               {"queried", out.queried}});
  if (out.review) {
    state.clause(clause_id).low_confidence = true;
    run.reviews.push_back(*out.review);
    return;
  }
  if (config_.escalation.route == ec::Route::kOff) {
    state.clause(clause_id).low_confidence = true;
    return;
  }
  try {
    ec::apply_feedback(state, out.decision, &run.log, st);
  } catch (const Error& e) {
    run.log.add(st, "warning", clause_id, std::string(e.code_name()), {{"message", e.what()}});
    state.clause(clause_id).low_confidence = true;
  }
}

void Pipeline::detect_structures(State& state, PipelineRun& run) {
  const std::string st = tag(Stage::kFormulate);
  auto proposals = structure::detect_structures(state, structure::default_pool(), backend_, run.log,
                                                config_.retries, st);
  for (const auto& prop : proposals) {
    // Targets may have been consumed by an earlier accepted proposal.
    auto verdict = structure::verify_proposal(state, prop);
    if (!verdict.accepted) {
      run.log.add(st, "structure", prop.targets.empty() ? "" : prop.targets.front(), "rejected",
                  {{"proposal", structure::proposal_to_json(prop)}, {"reason", verdict.reason}});
      continue;
    }
    structure::apply_proposal(state, prop, &run.log, st);
  }
}

// ---------------------------------------------------------------------------
// Code

void Pipeline::code_clause(State& state, PipelineRun& run, const std::string& clause_id) {
  const std::string st = tag(Stage::kCode);
  const Clause& clause = state.clause(clause_id);
  if (clause.status != ClauseStatus::kFormulated) {
    throw Error(ErrorCode::kStagePrecondition, "clause " + clause_id + " is not Formulated");
  }
  ClauseContext ctx = state.context_for(clause_id);
  std::string context = llm::describe_symbols(ctx);
  auto validator = [](const json& payload) {
    if (!payload.is_object() || !payload.contains("code") || !payload["code"].is_string()) {
      throw Error(ErrorCode::kInvalidPayload, "expected {\"code\": \"...\"}");
    }
  };
  llm::Prompt p = llm::make_prompt(llm::default_templates().get("code_clause"),
                                   {{"clause", clause.description}, {"formulation", clause.formulation},
                                    {"context", context}},
                                   clause_id);
  llm::LlmResponse r = llm::complete(backend_, p, validator, config_.retries);
  run.log.add(st, "llm", clause_id, "ok", {{"template", "code_clause"}, {"retries", r.retry_count}}, p.fingerprint);
  std::string code = r.payload["code"].get<std::string>();

  auto try_build = [&](const std::string& src) -> std::optional<std::string> {
    try {
      ir::build_fragment(state.clause(clause_id), src, ir::symbols_of(ctx));
      return std::nullopt;
    } catch (const Error& e) {
      return describe_failure(e);
    }
  };
  auto problem = try_build(code);
  if (problem) {
    run.log.add(st, "code_repair", clause_id, "requested", {{"error", *problem}});
    llm::Prompt rp = llm::make_prompt(llm::default_templates().get("code_repair"),
                                      {{"clause", clause.description}, {"formulation", clause.formulation},
                                       {"context", context}, {"code", code}, {"error", *problem}},
                                      clause_id);
    llm::LlmResponse rr = llm::complete(backend_, rp, validator, config_.retries);
    run.log.add(st, "llm", clause_id, "ok", {{"template", "code_repair"}, {"retries", rr.retry_count}},
                rp.fingerprint);
    code = rr.payload["code"].get<std::string>();
    problem = try_build(code);
  }
  Clause& c = state.clause(clause_id);
  c.fragment = code;
  c.status = ClauseStatus::kCoded;
  if (problem) {
    // Kept as written; assembly fails on it and the debug loop sees it.
    run.log.add(st, "error", clause_id, "code_error", {{"message", *problem}});
    return;
  }
  auto frag = ir::build_fragment(c, code, ir::symbols_of(ctx));
  for (const auto& s : ir::fragment_symbols(frag)) state.connect(clause_id, s);
}

// ---------------------------------------------------------------------------
// Assemble / solve / debug

void Pipeline::assemble(State& state, PipelineRun& run) {
  const std::string st = static_cast<int>(run.cursor) > static_cast<int>(Stage::kAssemble) ? tag(Stage::kSolveDebug)
                                                                                           : tag(Stage::kAssemble);
  run.failure.reset();
  run.model.reset();
  run.outcome.reset();
  ir::SymbolTable table = ir::symbols_of(state);
  std::vector<ir::Fragment> fragments;
  for (const auto& c : state.clauses()) {
    if (c.status != ClauseStatus::kCoded || !c.fragment) {
      run.failure = "StagePrecondition: clause " + c.id + " has no code";
      run.log.add(st, "failure", c.id, "StagePrecondition", {{"message", *run.failure}});
      return;
    }
    try {
      fragments.push_back(ir::build_fragment(c, *c.fragment, table));
    } catch (const Error& e) {
      run.failure = describe_failure(e, "clause " + c.id);
      run.log.add(st, "failure", c.id, std::string(e.code_name()), {{"message", *run.failure}});
      return;
    }
  }
  try {
    ir::GroundOptions opt;
    opt.default_big_m = config_.big_m;
    run.model = ir::ground(fragments, state, opt);
  } catch (const Error& e) {
    run.failure = describe_failure(e);
    run.log.add(st, "failure", "", std::string(e.code_name()), {{"message", *run.failure}});
    return;
  }
  for (const auto& d : validate(*run.model)) {
    run.log.add(st, "diagnostic", "", d.code, {{"message", d.message}});
  }
  run.log.add(st, "assembled", "", "ok", {{"rows", run.model->num_rows()}, {"cols", run.model->num_cols()}});
}

void Pipeline::solve(State& state, PipelineRun& run) {
  (void)state;
  const std::string st = tag(Stage::kSolveDebug);
  if (run.failure) return;
  if (!run.model) {
    run.failure = "StagePrecondition: nothing assembled";
    return;
  }
  Solution sol;
  try {
    auto engine = make_engine(config_.engine);
    sol = nlmilp::solve(*run.model, config_.solver, *engine);
  } catch (const Error& e) {
    run.failure = describe_failure(e);
    run.log.add(st, "failure", "", std::string(e.code_name()), {{"message", *run.failure}});
    return;
  }
  SolveOutcome o;
  o.status = sol.status;
  o.objective = sol.objective;
  if (sol.status == SolveStatus::kOptimal) o.primal = sol.primal_by_name();
  o.diagnostics = sol.message;
  run.log.add(st, "solve", "", std::string(nlmilp::to_string(sol.status)),
              {{"objective", sol.objective ? json(*sol.objective) : json(nullptr)},
               {"iterations", sol.stats.iterations}, {"nodes", sol.stats.nodes}, {"engine", sol.engine}});
  bool broken = sol.status == SolveStatus::kError ||
                (config_.repair_infeasible &&
                 (sol.status == SolveStatus::kInfeasible || sol.status == SolveStatus::kUnbounded));
  if (broken) {
    run.failure = std::string(nlmilp::to_string(sol.status)) + ": " +
                  (sol.message.empty() ? std::string("the solver reported ") + std::string(nlmilp::to_string(sol.status))
                                       : sol.message);
    run.log.add(st, "failure", "", std::string(nlmilp::to_string(sol.status)), {{"message", *run.failure}});
    return;
  }
  run.outcome = o;
}

void Pipeline::debug_loop(State& state, PipelineRun& run) {
  const std::string st = tag(Stage::kSolveDebug);
  auto validator = [&](const json& payload) {
    if (!payload.is_object() || !payload.contains("fragments") || !payload["fragments"].is_object()) {
      throw Error(ErrorCode::kInvalidPayload, "expected {\"fragments\": {clause id: markup}}");
    }
    for (const auto& item : payload["fragments"].items()) {
      if (!state.find_clause(item.key())) throw Error(ErrorCode::kInvalidPayload, "unknown clause '" + item.key() + "'");
      if (!item.value().is_string()) throw Error(ErrorCode::kInvalidPayload, "fragment text must be a string");
    }
  };
  run.debug_attempts = 0;
  while (run.failure) {
    if (run.debug_attempts >= config_.max_debug_attempts) {
      throw Error(ErrorCode::kDebugExhausted, "no fix after " + std::to_string(run.debug_attempts) +
                                                  " attempts; last failure: " + *run.failure);
    }
    int attempt = ++run.debug_attempts;
    std::string fragments;
    for (const auto& c : state.clauses()) fragments += c.id + ": " + c.fragment.value_or("(none)") + "\n";
    llm::Prompt p = llm::make_prompt(llm::default_templates().get("debug_model"),
                                     {{"description", problem_text(state)}, {"failure", *run.failure},
                                      {"fragments", fragments}, {"symbols", all_symbols(state)},
                                      {"attempt", std::to_string(attempt)}},
                                     std::to_string(attempt));
    json changed = json::array();
    try {
      llm::LlmResponse r = llm::complete(backend_, p, validator, config_.retries);
      for (const auto& item : r.payload["fragments"].items()) {
        Clause& c = state.clause(item.key());
        c.fragment = item.value().get<std::string>();
        c.status = ClauseStatus::kCoded;
        for (const auto& s : ir::referenced_symbols(*c.fragment, ir::symbols_of(state))) state.connect(c.id, s);
        changed.push_back(item.key());
      }
      run.log.add(st, "debug_attempt", std::to_string(attempt), "reply",
                  {{"failure", *run.failure}, {"changed", changed}}, p.fingerprint);
    } catch (const Error& e) {
      run.log.add(st, "debug_attempt", std::to_string(attempt), std::string(e.code_name()),
                  {{"failure", *run.failure}, {"message", e.what()}}, p.fingerprint);
      continue;
    }
    assemble(state, run);
    solve(state, run);
  }
  run.log.add(st, "debug", "", "fixed", {{"attempts", run.debug_attempts}});
}

// ---------------------------------------------------------------------------

PipelineBundle make_pipeline(const RunConfig& config, const std::filesystem::path& base) {
  PipelineBundle b;
  b.backend = llm::make_backend(config.backend, base);
  if (config.strong_backend) b.strong = llm::make_backend(*config.strong_backend, base);
  b.pipeline = std::make_unique<Pipeline>(config, *b.backend, b.strong.get());
  return b;
}

void rewind(const State& state, PipelineRun& run) {
  Stage need = run.cursor;
  bool extracted = false, formulated = false;
  for (const auto& c : state.clauses()) {
    extracted = extracted || c.status == ClauseStatus::kExtracted;
    formulated = formulated || c.status == ClauseStatus::kFormulated;
  }
  auto at_most = [&](Stage s) {
    if (static_cast<int>(need) > static_cast<int>(s)) need = s;
  };
  if (static_cast<int>(run.cursor) > static_cast<int>(Stage::kFormulate) && extracted) at_most(Stage::kFormulate);
  if (static_cast<int>(run.cursor) > static_cast<int>(Stage::kCode) && formulated) at_most(Stage::kCode);
  at_most(Stage::kAssemble);
  if (static_cast<int>(run.cursor) < static_cast<int>(Stage::kAssemble)) need = run.cursor;
  if (need != run.cursor) {
    run.log.add(tag(need), "rewind", "", tag(need), {{"from", tag(run.cursor)}});
    run.cursor = need;
    run.model.reset();
    run.outcome.reset();
    run.failure.reset();
    run.debug_attempts = 0;
  }
}

std::string failure_stage(const EventLog& log) {
  for (const auto& e : log.events()) {
    if (e.kind != "error") continue;
    if (e.stage == "ExtractParams" || e.stage == "ExtractClauses") return "Extraction";
    if (e.stage == "Formulate") return "Formulation";
    return "Coding";
  }
  for (const auto& e : log.events()) {
    if (e.kind == "failure") return "Coding";
  }
  return "None";
}

}  // namespace nlmilp::pipeline
