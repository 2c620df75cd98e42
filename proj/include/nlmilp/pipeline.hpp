#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlmilp/error_correction.hpp"
#include "nlmilp/events.hpp"
#include "nlmilp/llm.hpp"
#include "nlmilp/model.hpp"
#include "nlmilp/solver.hpp"
#include "nlmilp/state.hpp"

namespace nlmilp::pipeline {

using nlohmann::json;

enum class Stage { kExtractParams, kExtractClauses, kFormulate, kCode, kAssemble, kSolveDebug, kDone };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view text);  // throws kInvalidArgument

struct RunConfig {
  llm::BackendSpec backend;
  std::optional<llm::BackendSpec> strong_backend;
  ec::EscalationPolicy escalation;  // route Off by default
  bool extraction_ec = true;
  bool modeling_ec = true;
  int reflect_passes = 1;
  bool debug = true;
  int max_debug_attempts = 5;
  bool repair_infeasible = false;
  int retries = 2;
  bool structure_detection = true;
  bool classify = true;
  std::string engine = "simplex";
  SolverParams solver;
  double big_m = kDefaultBigM;
};

// Relative paths in backend specs are kept as written; resolve them against
// the config file's directory when building backends.
RunConfig run_config_from_json(const json& j, const std::string& path = "config");
json run_config_to_json(const RunConfig& config);

struct SolveOutcome {
  SolveStatus status = SolveStatus::kError;
  std::optional<double> objective;
  std::map<std::string, double> primal;
  std::string diagnostics;
};

json outcome_to_json(const SolveOutcome& outcome);
SolveOutcome outcome_from_json(const json& j, const std::string& path = "outcome");

struct PipelineRun {
  std::string project;
  Stage cursor = Stage::kExtractParams;
  int debug_attempts = 0;
  std::map<std::string, Tensor> supplied_data;  // instance data; overrides extracted values
  EventLog log;
  std::vector<ec::PendingReview> reviews;
  std::vector<json> notifications;
  std::optional<std::string> failure;  // set by Assemble / SolveDebug
  std::optional<GroundModel> model;
  std::optional<SolveOutcome> outcome;
};

// Everything except the event log (kept as JSON lines) and the ground model
// (rebuilt by Assemble).
json run_to_json(const PipelineRun& run);
PipelineRun run_from_json(const json& j);

// Nested JSON arrays (or a number) to a row-major tensor. Throws kShapeMismatch
// on ragged input.
Tensor tensor_from_nested(const json& j, const std::string& path = "data");
json tensor_to_nested(const Tensor& t);

class Pipeline {
 public:
  Pipeline(RunConfig config, llm::Backend& backend, llm::Backend* strong = nullptr);

  const RunConfig& config() const { return config_; }

  // Runs exactly `stage`; it must be the run's cursor (kStagePrecondition
  // otherwise).
  void run_stage(State& state, PipelineRun& run, Stage stage);
  // Runs every remaining stage.
  SolveOutcome run_all(State& state, PipelineRun& run);

  void extract_parameters(State& state, PipelineRun& run);
  void extract_clauses(State& state, PipelineRun& run);
  void formulate_clause(State& state, PipelineRun& run, const std::string& clause_id);
  void code_clause(State& state, PipelineRun& run, const std::string& clause_id);
  // Builds and grounds every fragment; a failure is stored on the run.
  void assemble(State& state, PipelineRun& run);
  // Solves the assembled model; a failure (build, ground, solver Error, or
  // Infeasible/Unbounded when repair_infeasible) is stored on the run.
  void solve(State& state, PipelineRun& run);
  // Up to max_debug_attempts repair rounds on run.failure. Throws
  // kDebugExhausted carrying the last failure.
  void debug_loop(State& state, PipelineRun& run);

 private:
  void escalate_clause(State& state, PipelineRun& run, const std::string& clause_id,
                       const llm::LlmResponse& response);
  void detect_structures(State& state, PipelineRun& run);

  RunConfig config_;
  llm::Backend& backend_;
  llm::Backend* strong_;
};

// Builds backends from the config (paths relative to `base`) and keeps them
// alive with the pipeline.
struct PipelineBundle {
  std::unique_ptr<llm::Backend> backend;
  std::unique_ptr<llm::Backend> strong;
  std::unique_ptr<Pipeline> pipeline;
};

PipelineBundle make_pipeline(const RunConfig& config, const std::filesystem::path& base = {});

// Moves the cursor back when clauses were reset by feedback: Extracted
// clauses need Formulate, Formulated ones need Code, and any Done run must
// be assembled again.
void rewind(const State& state, PipelineRun& run);

// Earliest failed stage in the log mapped to Extraction / Formulation /
// Coding, or None.
std::string failure_stage(const EventLog& log);

}  // namespace nlmilp::pipeline
