#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlmilp/pipeline.hpp"

namespace nlmilp::eval {

using nlohmann::json;

struct Truth {
  std::string status = "optimal";  // optimal | infeasible | unbounded
  std::optional<double> objective;
  std::map<std::string, double> assignment;
  std::optional<std::string> reference_lp;  // path relative to the instance file
};

struct Instance {
  std::string id;
  std::string description;
  std::map<std::string, Tensor> data;
  Truth truth;
  std::vector<std::string> labels;
  std::filesystem::path path;
};

// Schema: {id, description, data?, truth: {objective?, assignment?, status?,
// reference_lp?}, labels?}. Throws kSchemaViolation naming the path.
Instance instance_from_json(const json& j, const std::string& origin = "instance");
Instance load_instance(const std::filesystem::path& path);
// Every *.json in `dir`, sorted by file name.
std::vector<Instance> load_suite(const std::filesystem::path& dir);

struct Tolerance {
  double absolute = 1e-6;
  double relative = 1e-6;
  double feasibility = 1e-6;
};

struct ScoreRecord {
  std::string id;
  bool ran = false;
  bool value_correct = false;
  bool solution_correct = false;
  bool solved = false;
  std::string failure_stage = "None";  // Extraction | Formulation | Coding | None
  std::string status;
  std::optional<double> objective;
  std::string detail;
  double seconds = 0.0;
};

json record_to_json(const ScoreRecord& r);

// Three conditions: the run produced a solver verdict, the value matches
// the truth, and the point is feasible for the reference model and attains
// the truth objective (any optimum counts).
ScoreRecord score(const pipeline::SolveOutcome& outcome, const Instance& instance, const EventLog& log,
                  const Tolerance& tol = {});

struct Ablation {
  bool disable_debug = false;
  bool disable_extraction_ec = false;
  bool disable_modeling_ec = false;
  bool disable_llm_feedback = false;
};

// Names: disable_debug, disable_extraction_ec, disable_modeling_ec,
// disable_llm_feedback. Throws kInvalidArgument.
void set_ablation(Ablation& a, const std::string& name);
pipeline::RunConfig apply_ablation(pipeline::RunConfig config, const Ablation& a);

struct InstanceRun {
  State state;
  pipeline::PipelineRun run;
  ScoreRecord record;
};

InstanceRun run_instance(const Instance& instance, const pipeline::RunConfig& config,
                         const std::filesystem::path& base, const Tolerance& tol = {});

struct SuiteReport {
  std::vector<ScoreRecord> records;
  int solved = 0;
  int total = 0;
  std::optional<double> accuracy;  // unset for an empty suite
  Ablation ablation;
};

SuiteReport run_suite(const std::vector<Instance>& instances, const pipeline::RunConfig& config,
                      const Ablation& ablation, const std::filesystem::path& base, int workers = 1,
                      const Tolerance& tol = {});

json report_to_json(const SuiteReport& report);
std::string report_csv(const SuiteReport& report);

}  // namespace nlmilp::eval
