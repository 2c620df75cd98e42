#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "nlmilp/pipeline.hpp"

namespace nlmilp::project {

using nlohmann::json;

// On-disk project:
//   project.json   {id, base}            base resolves relative backend paths
//   config.json    run configuration
//   state.json     core state
//   run.json       cursor, reviews, notifications, outcome, data
//   log.jsonl      event log, append-only
//   artifacts/     <kind>-<hash>.<ext> plus index.json (kind -> file)
struct Project {
  std::filesystem::path dir;
  std::string id;
  std::filesystem::path base;
  json config_json;
  pipeline::RunConfig config;
  State state;
  pipeline::PipelineRun run;
  std::size_t logged = 0;  // events already on disk
};

Project create(const std::filesystem::path& dir, const std::string& id, const std::string& description,
               const json& config, const std::filesystem::path& base,
               const std::map<std::string, Tensor>& data = {});
Project open(const std::filesystem::path& dir);
bool exists(const std::filesystem::path& dir);
// Writes state, run and any new log events.
void save(Project& p);

// Runs one stage with a fresh pipeline and saves. Artifacts: the LP after
// Assemble and SolveDebug, the report after SolveDebug, the log always.
// Errors propagate after the project is saved.
void run_stage(Project& p, pipeline::Stage stage);
// Runs the remaining stages.
pipeline::SolveOutcome run_all(Project& p);

// Records `content` under artifacts/ by content hash; returns the file name.
std::string write_artifact(Project& p, const std::string& kind, const std::string& ext, const std::string& content);
// Latest artifact of a kind (lp, report, log).
std::optional<std::filesystem::path> artifact(const Project& p, const std::string& kind);
void refresh_artifacts(Project& p);

// Resolves a pending review: applies the decision to its target, drops the
// review and rewinds the run. Throws kUnknownTarget when `review_id` is not
// pending.
void resolve_review(Project& p, const std::string& review_id, const std::string& action, const json& payload);
// Direct edit of a clause or symbol (a human Modify).
void patch_item(Project& p, const std::string& item, const json& payload);

// Data editing. Needs extracted parameters (kStagePrecondition otherwise).
// One entry per parameter: symbol, shape, resolved extents or null, and
// the bound value as nested arrays or null.
json data_schema(const Project& p);
// Binds all tensors or none; rewinds to Assemble when the model is stale.
void upload_data(Project& p, const std::map<std::string, Tensor>& data);
struct GenerateRange {
  double lower = 1;
  double upper = 10;
  bool integer = true;
};
// Uniform random values for parameters without data (all of them with
// `overwrite`). Scalars go first so they can size the others. Returns
// what was generated.
std::map<std::string, Tensor> generate_data(Project& p, const std::map<std::string, GenerateRange>& ranges,
                                            std::uint64_t seed, bool overwrite = false);

json report(const Project& p);
json summary(const Project& p);

}  // namespace nlmilp::project
