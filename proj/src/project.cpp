#include "nlmilp/project.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/llm.hpp"
#include "nlmilp/solver.hpp"

namespace nlmilp::project {

namespace fs = std::filesystem;
namespace ju = json_util;

namespace {

void load_config(Project& p) { p.config = pipeline::run_config_from_json(p.config_json, "config.json"); }

std::string log_text(const fs::path& dir) {
  fs::path f = dir / "log.jsonl";
  return fs::exists(f) ? ju::read_text(f) : std::string();
}

json read_index(const Project& p) {
  fs::path f = p.dir / "artifacts" / "index.json";
  return fs::exists(f) ? ju::read_file(f) : json::object();
}

}  // namespace

bool exists(const fs::path& dir) { return fs::exists(dir / "project.json"); }

Project create(const fs::path& dir, const std::string& id, const std::string& description, const json& config,
               const fs::path& base, const std::map<std::string, Tensor>& data) {
  if (project::exists(dir)) throw Error(ErrorCode::kInvalidArgument, "project already exists: " + dir.string());
  Project p;
  p.dir = dir;
  p.id = id;
  p.base = fs::absolute(base.empty() ? fs::current_path() : base);
  p.config_json = config.is_null() ? json::object() : config;
  load_config(p);
  p.state.set_description(description);
  p.run.project = id;
  p.run.supplied_data = data;
  fs::create_directories(dir / "artifacts");
  ju::write_file(dir / "project.json", {{"id", id}, {"base", p.base.string()}});
  ju::write_file(dir / "config.json", p.config_json);
  p.run.log.add("Project", "created", id, "ok");
  save(p);
  return p;
}

Project open(const fs::path& dir) {
  if (!project::exists(dir)) throw Error(ErrorCode::kUnknownTarget, "no project at " + dir.string());
  Project p;
  p.dir = dir;
  json meta = ju::read_file(dir / "project.json");
  p.id = ju::get_string(meta, "id", "project.json");
  p.base = ju::get_string(meta, "base", "project.json");
  p.config_json = ju::read_file(dir / "config.json");
  load_config(p);
  p.state = load_state(dir / "state.json");
  p.run = pipeline::run_from_json(ju::read_file(dir / "run.json"));
  p.run.log = EventLog::from_jsonl(log_text(dir));
  p.logged = p.run.log.size();
  return p;
}

void save(Project& p) {
  save_state(p.state, p.dir / "state.json");
  ju::write_file(p.dir / "run.json", pipeline::run_to_json(p.run));
  p.run.log.append_to(p.dir / "log.jsonl", p.logged);
  p.logged = p.run.log.size();
}

std::string write_artifact(Project& p, const std::string& kind, const std::string& ext, const std::string& content) {
  std::string name = kind + "-" + llm::hash_hex(content) + "." + ext;
  fs::path f = p.dir / "artifacts" / name;
  fs::create_directories(f.parent_path());
  if (!fs::exists(f)) ju::write_text(f, content);
  json index = read_index(p);
  index[kind] = name;
  ju::write_file(p.dir / "artifacts" / "index.json", index);
  return name;
}

std::optional<fs::path> artifact(const Project& p, const std::string& kind) {
  json index = read_index(p);
  if (!index.contains(kind)) return std::nullopt;
  return p.dir / "artifacts" / index[kind].get<std::string>();
}

namespace {

void require_parameters(const Project& p) {
  if (static_cast<int>(p.run.cursor) <= static_cast<int>(pipeline::Stage::kExtractParams)) {
    throw Error(ErrorCode::kStagePrecondition, "parameters are not extracted yet");
  }
}

}  // namespace

json data_schema(const Project& p) {
  require_parameters(p);
  json out = json::array();
  for (const Parameter& par : p.state.parameters()) {
    json shape = json::array();
    for (const Dim& d : par.shape) shape.push_back(dim_to_string(d));
    auto resolved = p.state.resolve_shape(par.shape);
    const Tensor* t = p.state.find_data(par.symbol);
    out.push_back({{"symbol", par.symbol},
                   {"definition", par.definition},
                   {"shape", shape},
                   {"resolved", resolved ? json(*resolved) : json(nullptr)},
                   {"value", t ? pipeline::tensor_to_nested(*t) : json(nullptr)}});
  }
  return out;
}

void upload_data(Project& p, const std::map<std::string, Tensor>& data) {
  require_parameters(p);
  State next = p.state;
  // Scalars first: they may size the rest.
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& [symbol, t] : data) {
      if (t.shape.empty() != (pass == 0)) continue;
      if (!next.find_parameter(symbol)) throw Error(ErrorCode::kUnknownTarget, "no parameter '" + symbol + "'");
      next.bind_data(symbol, t);
    }
  }
  p.state = std::move(next);
  for (const auto& [symbol, t] : data) {
    p.run.supplied_data[symbol] = t;
    p.run.log.add("Data", "data", symbol, "bound");
  }
  pipeline::rewind(p.state, p.run);
  save(p);
}

std::map<std::string, Tensor> generate_data(Project& p, const std::map<std::string, GenerateRange>& ranges,
                                            std::uint64_t seed, bool overwrite) {
  require_parameters(p);
  for (const auto& [symbol, r] : ranges) {
    if (!p.state.find_parameter(symbol)) throw Error(ErrorCode::kUnknownTarget, "no parameter '" + symbol + "'");
    if (!(r.lower <= r.upper) || !std::isfinite(r.lower) || !std::isfinite(r.upper)) {
      throw Error(ErrorCode::kInvalidArgument, "bad range for '" + symbol + "'");
    }
    if (r.integer && std::ceil(r.lower) > std::floor(r.upper)) {
      throw Error(ErrorCode::kInvalidArgument, "no integer in range for '" + symbol + "'");
    }
  }
  std::mt19937_64 rng(seed);
  auto draw = [&](const GenerateRange& r) {
    if (r.integer) {
      return static_cast<double>(std::uniform_int_distribution<std::int64_t>(
          static_cast<std::int64_t>(std::ceil(r.lower)), static_cast<std::int64_t>(std::floor(r.upper)))(rng));
    }
    return std::uniform_real_distribution<double>(r.lower, r.upper)(rng);
  };
  State scratch = p.state;
  std::map<std::string, Tensor> out;
  for (int pass = 0; pass < 2; ++pass) {
    for (const Parameter& par : scratch.parameters()) {
      if (par.shape.empty() != (pass == 0)) continue;
      if (!overwrite && scratch.find_data(par.symbol)) continue;
      auto it = ranges.find(par.symbol);
      GenerateRange r = it == ranges.end() ? GenerateRange{} : it->second;
      Tensor t;
      if (!par.shape.empty()) {
        auto shape = scratch.resolve_shape(par.shape);
        if (!shape) throw Error(ErrorCode::kInvalidShape, "cannot size '" + par.symbol + "': give its dimensions first");
        t.shape = *shape;
      }
      t.values.resize(t.element_count());
      for (double& v : t.values) v = draw(r);
      if (overwrite) scratch.clear_data(par.symbol);
      scratch.bind_data(par.symbol, t);
      out[par.symbol] = std::move(t);
    }
  }
  if (overwrite) {
    for (const auto& [symbol, t] : out) p.state.clear_data(symbol);
  }
  upload_data(p, out);
  return out;
}

json report(const Project& p) {
  json j;
  j["project"] = p.id;
  j["cursor"] = std::string(pipeline::to_string(p.run.cursor));
  j["outcome"] = p.run.outcome ? pipeline::outcome_to_json(*p.run.outcome) : json(nullptr);
  j["failure"] = p.run.failure ? json(*p.run.failure) : json(nullptr);
  j["failure_stage"] = pipeline::failure_stage(p.run.log);
  j["debug_attempts"] = p.run.debug_attempts;
  j["pending_reviews"] = p.run.reviews.size();
  return j;
}

json summary(const Project& p) {
  json j = report(p);
  j["state"] = state_to_json(p.state);
  return j;
}

void refresh_artifacts(Project& p) {
  save(p);
  if (p.run.model) write_artifact(p, "lp", "lp", write_lp(*p.run.model));
  if (p.run.cursor == pipeline::Stage::kDone) write_artifact(p, "report", "json", report(p).dump(2) + "\n");
  write_artifact(p, "log", "jsonl", log_text(p.dir));
}

void run_stage(Project& p, pipeline::Stage stage) {
  auto bundle = pipeline::make_pipeline(p.config, p.base);
  // Assemble rebuilds the model; SolveDebug needs it after a reload.
  if (stage == pipeline::Stage::kSolveDebug && !p.run.model && p.run.cursor == stage) {
    bundle.pipeline->assemble(p.state, p.run);
  }
  try {
    bundle.pipeline->run_stage(p.state, p.run, stage);
  } catch (...) {
    refresh_artifacts(p);
    throw;
  }
  refresh_artifacts(p);
}

pipeline::SolveOutcome run_all(Project& p) {
  while (p.run.cursor != pipeline::Stage::kDone) run_stage(p, p.run.cursor);
  return p.run.outcome.value_or(pipeline::SolveOutcome{});
}

void resolve_review(Project& p, const std::string& review_id, const std::string& action, const json& payload) {
  auto it = std::find_if(p.run.reviews.begin(), p.run.reviews.end(),
                         [&](const ec::PendingReview& r) { return r.id == review_id; });
  if (it == p.run.reviews.end()) throw Error(ErrorCode::kUnknownTarget, "no pending review '" + review_id + "'");
  ec::FeedbackDecision d;
  d.action = ec::feedback_action_from_string(action);
  d.payload = payload.is_null() ? json::object() : payload;
  if (!d.payload.is_object()) throw Error(ErrorCode::kInvalidPayload, "payload must be an object");
  d.target = it->target;
  // List-level reviews (all parameters, all clauses) name the item to change.
  if (it->target == "parameters" || it->target == "clauses") {
    if (d.action == ec::FeedbackAction::kKeep) {
      d.target.clear();
    } else {
      if (!d.payload.contains("item") || !d.payload["item"].is_string()) {
        throw Error(ErrorCode::kInvalidPayload, "payload needs \"item\" for a " + it->target + " review");
      }
      d.target = d.payload["item"].get<std::string>();
      d.payload.erase("item");
    }
  }
  if (!d.target.empty()) {
    ec::validate_feedback(p.state, d);
    ec::apply_feedback(p.state, d, &p.run.log, "Review");
  }
  p.run.log.add("Review", "review", review_id, action, {{"target", d.target}});
  p.run.reviews.erase(it);
  pipeline::rewind(p.state, p.run);
  save(p);
}

void patch_item(Project& p, const std::string& item, const json& payload) {
  ec::FeedbackDecision d;
  d.target = item;
  d.action = ec::FeedbackAction::kModify;
  d.payload = payload;
  ec::validate_feedback(p.state, d);
  ec::apply_feedback(p.state, d, &p.run.log, "Review");
  pipeline::rewind(p.state, p.run);
  save(p);
}

}  // namespace nlmilp::project
