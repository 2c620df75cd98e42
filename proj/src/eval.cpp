#include "nlmilp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"

namespace nlmilp::eval {

namespace ju = json_util;
namespace fs = std::filesystem;

Instance instance_from_json(const json& j, const std::string& origin) {
  ju::expect_object(j, origin, {"id", "description", "data", "truth", "labels"});
  Instance in;
  in.id = ju::get_string(j, "id", origin);
  in.description = ju::get_string(j, "description", origin);
  if (j.contains("data")) {
    const json& d = j["data"];
    if (!d.is_object()) ju::violation(origin + "/data", "expected an object");
    for (const auto& item : d.items()) {
      try {
        in.data[item.key()] = pipeline::tensor_from_nested(item.value(), origin + "/data/" + item.key());
      } catch (const Error& e) {
        ju::violation(origin + "/data/" + item.key(), e.what());
      }
    }
  }
  const json& t = ju::require(j, "truth", origin);
  const std::string tp = origin + "/truth";
  ju::expect_object(t, tp, {"objective", "assignment", "status", "reference_lp"});
  in.truth.status = ju::get_string_or(t, "status", tp, "optimal");
  if (in.truth.status != "optimal" && in.truth.status != "infeasible" && in.truth.status != "unbounded") {
    ju::violation(tp + "/status", "expected optimal, infeasible or unbounded");
  }
  if (t.contains("objective") && !t["objective"].is_null()) {
    double v = ju::get_number(t, "objective", tp);
    if (!std::isfinite(v)) ju::violation(tp + "/objective", "must be finite");
    in.truth.objective = v;
  }
  if (in.truth.status == "optimal" && !in.truth.objective) ju::violation(tp + "/objective", "required when optimal");
  if (t.contains("assignment")) {
    if (!t["assignment"].is_object()) ju::violation(tp + "/assignment", "expected an object");
    for (const auto& item : t["assignment"].items()) {
      if (!item.value().is_number()) ju::violation(tp + "/assignment/" + item.key(), "expected a number");
      in.truth.assignment[item.key()] = item.value().get<double>();
    }
  }
  if (t.contains("reference_lp")) in.truth.reference_lp = ju::get_string(t, "reference_lp", tp);
  if (j.contains("labels")) {
    for (const auto& l : ju::get_array(j, "labels", origin)) {
      if (!l.is_string()) ju::violation(origin + "/labels", "expected strings");
      in.labels.push_back(l.get<std::string>());
    }
  }
  return in;
}

Instance load_instance(const fs::path& path) {
  Instance in = instance_from_json(ju::read_file(path), path.filename().string());
  in.path = path;
  return in;
}

std::vector<Instance> load_suite(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Instance> out;
  for (const auto& f : files) out.push_back(load_instance(f));
  return out;
}

json record_to_json(const ScoreRecord& r) {
  return {{"id", r.id},
          {"ran", r.ran},
          {"value_correct", r.value_correct},
          {"solution_correct", r.solution_correct},
          {"solved", r.solved},
          {"failure_stage", r.failure_stage},
          {"status", r.status},
          {"objective", r.objective ? json(*r.objective) : json(nullptr)},
          {"detail", r.detail},
          {"seconds", r.seconds}};
}

namespace {

bool close(double a, double b, const Tolerance& tol) {
  return std::fabs(a - b) <= std::max(tol.absolute, tol.relative * std::fabs(b));
}

std::string expected_status(const Truth& t) {
  if (t.status == "infeasible") return "Infeasible";
  if (t.status == "unbounded") return "Unbounded";
  return "Optimal";
}

}  // namespace

ScoreRecord score(const pipeline::SolveOutcome& outcome, const Instance& instance, const EventLog& log,
                  const Tolerance& tol) {
  ScoreRecord r;
  r.id = instance.id;
  r.status = std::string(to_string(outcome.status));
  r.objective = outcome.objective;
  r.ran = outcome.status != SolveStatus::kError && outcome.status != SolveStatus::kTimeLimit;
  const Truth& t = instance.truth;
  if (r.ran) {
    if (t.status == "optimal") {
      r.value_correct = outcome.status == SolveStatus::kOptimal && outcome.objective &&
                        close(*outcome.objective, *t.objective, tol);
    } else {
      r.value_correct = r.status == expected_status(t);
    }
  }
  if (r.value_correct && t.status != "optimal") {
    r.solution_correct = true;
  } else if (r.value_correct) {
    if (t.reference_lp) {
      fs::path lp = fs::path(*t.reference_lp);
      if (lp.is_relative() && !instance.path.empty()) lp = instance.path.parent_path() / lp;
      try {
        GroundModel ref = read_lp_file(lp.string());
        std::vector<double> x(ref.num_cols(), 0.0);
        std::string missing;
        for (int j = 0; j < ref.num_cols(); ++j) {
          auto it = outcome.primal.find(ref.col_names[j]);
          if (it == outcome.primal.end()) {
            missing = ref.col_names[j];
            break;
          }
          x[j] = it->second;
        }
        if (!missing.empty()) {
          r.detail = "reference column " + missing + " missing from the solution";
        } else {
          FeasibilityReport fr = check_feasibility(ref, x, tol.feasibility);
          double value = objective_value(ref, x);
          r.solution_correct = fr.feasible && close(value, *t.objective, tol);
          if (!fr.feasible) {
            r.detail = "point violates " + fr.worst + " by " + format_number(fr.max_violation);
          } else if (!r.solution_correct) {
            r.detail = "point attains " + format_number(value) + " on the reference model";
          }
        }
      } catch (const Error& e) {
        r.detail = "reference model: " + std::string(e.what());
      }
    } else if (!t.assignment.empty()) {
      r.solution_correct = true;
      for (const auto& [name, v] : t.assignment) {
        auto it = outcome.primal.find(name);
        if (it == outcome.primal.end() || !close(it->second, v, tol)) {
          r.solution_correct = false;
          r.detail = "assignment differs at " + name;
          break;
        }
      }
    } else {
      // Nothing to check the point against beyond the value.
      r.solution_correct = true;
      r.detail = "no reference model or assignment; value only";
    }
  } else if (r.ran && r.detail.empty()) {
    r.detail = "expected " + expected_status(t) + (t.objective ? " " + format_number(*t.objective) : "") + ", got " +
               r.status + (outcome.objective ? " " + format_number(*outcome.objective) : "");
  }
  r.solved = r.ran && r.value_correct && r.solution_correct;
  if (!r.solved) {
    r.failure_stage = pipeline::failure_stage(log);
    if (!r.ran && r.detail.empty()) r.detail = outcome.diagnostics;
  }
  return r;
}

void set_ablation(Ablation& a, const std::string& name) {
  if (name == "disable_debug") {
    a.disable_debug = true;
  } else if (name == "disable_extraction_ec") {
    a.disable_extraction_ec = true;
  } else if (name == "disable_modeling_ec") {
    a.disable_modeling_ec = true;
  } else if (name == "disable_llm_feedback") {
    a.disable_llm_feedback = true;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown ablation '" + name + "'");
  }
}

pipeline::RunConfig apply_ablation(pipeline::RunConfig c, const Ablation& a) {
  if (a.disable_debug) c.debug = false;
  if (a.disable_extraction_ec) c.extraction_ec = false;
  if (a.disable_modeling_ec) c.modeling_ec = false;
  if (a.disable_llm_feedback) {
    c.escalation.route = ec::Route::kOff;
    c.strong_backend.reset();
  }
  return c;
}

InstanceRun run_instance(const Instance& instance, const pipeline::RunConfig& config, const fs::path& base,
                         const Tolerance& tol) {
  auto t0 = std::chrono::steady_clock::now();
  InstanceRun out;
  out.state.set_description(instance.description);
  out.run.project = instance.id;
  out.run.supplied_data = instance.data;
  pipeline::SolveOutcome outcome;
  try {
    auto bundle = pipeline::make_pipeline(config, base);
    outcome = bundle.pipeline->run_all(out.state, out.run);
  } catch (const Error& e) {
    outcome.status = SolveStatus::kError;
    outcome.diagnostics = std::string(e.code_name()) + ": " + e.what();
    if (out.run.log.count("error") == 0) {
      out.run.log.add(std::string(pipeline::to_string(out.run.cursor)), "error", "", std::string(e.code_name()),
                      {{"message", e.what()}});
    }
  }
  out.run.outcome = outcome;
  out.record = score(outcome, instance, out.run.log, tol);
  out.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

SuiteReport run_suite(const std::vector<Instance>& instances, const pipeline::RunConfig& config,
                      const Ablation& ablation, const fs::path& base, int workers, const Tolerance& tol) {
  SuiteReport rep;
  rep.ablation = ablation;
  pipeline::RunConfig cfg = apply_ablation(config, ablation);
  rep.records.resize(instances.size());
  std::size_t next = 0;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, workers));
  while (next < instances.size()) {
    std::vector<std::future<ScoreRecord>> jobs;
    std::size_t end = std::min(instances.size(), next + batch);
    for (std::size_t k = next; k < end; ++k) {
      jobs.push_back(std::async(std::launch::async,
                                [&, k] { return run_instance(instances[k], cfg, base, tol).record; }));
    }
    for (std::size_t k = next; k < end; ++k) rep.records[k] = jobs[k - next].get();
    next = end;
  }
  rep.total = static_cast<int>(rep.records.size());
  for (const auto& r : rep.records) rep.solved += r.solved;
  if (rep.total > 0) rep.accuracy = static_cast<double>(rep.solved) / rep.total;
  return rep;
}

json report_to_json(const SuiteReport& report) {
  json j;
  j["total"] = report.total;
  j["solved"] = report.solved;
  j["accuracy"] = report.accuracy ? json(*report.accuracy) : json("undefined");
  j["ablation"] = {{"disable_debug", report.ablation.disable_debug},
                   {"disable_extraction_ec", report.ablation.disable_extraction_ec},
                   {"disable_modeling_ec", report.ablation.disable_modeling_ec},
                   {"disable_llm_feedback", report.ablation.disable_llm_feedback}};
  j["records"] = json::array();
  for (const auto& r : report.records) j["records"].push_back(record_to_json(r));
  return j;
}

std::string report_csv(const SuiteReport& report) {
  std::ostringstream out;
  out << "id,ran,value_correct,solution_correct,solved,failure_stage,status,objective,seconds\n";
  for (const auto& r : report.records) {
    out << r.id << ',' << r.ran << ',' << r.value_correct << ',' << r.solution_correct << ',' << r.solved << ','
        << r.failure_stage << ',' << r.status << ',' << (r.objective ? format_number(*r.objective) : "") << ','
        << format_number(r.seconds) << '\n';
  }
  return out.str();
}

}  // namespace nlmilp::eval
