// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "nlmilp/equivalence.hpp"
#include "nlmilp/error.hpp"
#include "nlmilp/eval.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/sifting.hpp"
#include "nlmilp/solver.hpp"
#include "nlmilp/structure.hpp"
#include "oracles.hpp"

using namespace nlmilp;
using nlohmann::json;
namespace fs = std::filesystem;
namespace ju = json_util;

namespace {

const fs::path kData = NLMILP_DATA_DIR;
const fs::path kTests = NLMILP_TEST_DIR;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool close(double a, double b, double tol = 1e-6) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

// Every continuous solve made here goes through this so the duality
// criterion sees all of them.
struct DualityLedger {
  int solves = 0;
  int failures = 0;
  double worst = 0.0;
  std::string first_failure;

  Solution solve_lp(const GroundModel& m, const std::string& what) {
    Solution s = nlmilp::solve(m);
    if (!m.is_continuous() || s.status != SolveStatus::kOptimal) return s;
    ++solves;
    double gap = NAN;
    try {
      gap = std::fabs(*s.objective - dual_objective(m, s)) / std::max(1.0, std::fabs(*s.objective));
    } catch (const Error&) {
    }
    if (!(gap <= 1e-6) || dual_infeasibility(m, s) > 1e-6) {
      ++failures;
      if (first_failure.empty()) first_failure = what;
    }
    if (std::isfinite(gap)) worst = std::max(worst, gap);
    return s;
  }
};

DualityLedger duality;

struct Line {
  bool pass;
  std::string detail;
};

int failed = 0;

void report(const std::string& name, const std::function<Line()>& check) {
  Line l;
  try {
    l = check();
  } catch (const std::exception& e) {
    l = {false, std::string("threw: ") + e.what()};
  }
  if (!l.pass) ++failed;
  std::cout << (l.pass ? "PASS " : "FAIL ") << name << ": " << l.detail << std::endl;
}

pipeline::RunConfig scripted(const std::string& transcript) {
  pipeline::RunConfig c;
  c.backend.kind = llm::BackendSpec::Kind::kScripted;
  c.backend.transcript = (kData / "transcripts" / transcript).string();
  return c;
}

eval::Instance instance(const std::string& id) { return eval::load_instance(kData / "instances" / (id + ".json")); }

Line end_to_end() {
  auto t0 = std::chrono::steady_clock::now();
  int solved = 0;
  std::string detail;
  for (std::string id : {"factory", "facility", "crew"}) {
    auto in = instance(id);
    auto r = eval::run_instance(in, scripted("suite_clean.json"), kData);
    // Independent check: the reported point against the hand-written reference LP.
    bool ok = r.record.solved && r.run.outcome && r.run.outcome->objective && in.truth.objective &&
              close(*r.run.outcome->objective, *in.truth.objective);
    if (ok && in.truth.reference_lp) {
      GroundModel ref = read_lp_file((in.path.parent_path() / *in.truth.reference_lp).string());
      std::vector<double> x(ref.num_cols(), 0.0);
      for (int j = 0; j < ref.num_cols(); ++j) {
        auto it = r.run.outcome->primal.find(ref.col_names[j]);
        if (it == r.run.outcome->primal.end()) ok = false;
        else x[j] = it->second;
      }
      ok = ok && check_feasibility(ref, x).feasible && close(objective_value(ref, x), *in.truth.objective);
    }
    solved += ok;
    if (!detail.empty()) detail += ", ";
    detail += id + "=" + (r.run.outcome && r.run.outcome->objective ? format_number(*r.run.outcome->objective) : "-");
  }
  double secs = seconds_since(t0);
  std::ostringstream d;
  d << solved << "/3 solved (" << detail << ") in " << secs << " s";
  // Truths cross-checked with HiGHS when it is installed.
  bool highs_ok = true;
  if (std::system("python3 -c 'import highspy' >/dev/null 2>&1") == 0) {
    auto highs = make_engine("highs");
    int agree = 0;
    for (std::string id : {"factory", "facility", "crew"}) {
      auto in = instance(id);
      Solution h = nlmilp::solve(read_lp_file((in.path.parent_path() / *in.truth.reference_lp).string()), {}, *highs);
      agree += h.status == SolveStatus::kOptimal && close(*h.objective, *in.truth.objective);
    }
    highs_ok = agree == 3;
    d << "; HiGHS agrees on " << agree << "/3 reference optima";
  } else {
    d << "; HiGHS not installed, cross-check skipped";
  }
  return {solved == 3 && secs < 30.0 && highs_ok, d.str()};
}

Line debug_loop() {
  auto fault = eval::run_instance(instance("factory"), scripted("suite_fault.json"), kData);
  auto dead = eval::run_instance(instance("factory"), scripted("unfixable.json"), kData);
  bool repaired = fault.record.solved && fault.run.debug_attempts >= 1 && fault.run.debug_attempts <= 5;
  std::size_t logged = dead.run.log.count("debug_attempt");
  bool exhausted = !dead.record.solved && dead.run.outcome &&
                   dead.run.outcome->diagnostics.rfind("DebugExhausted", 0) == 0 && logged == 5;
  std::ostringstream d;
  d << "fault repaired after " << fault.run.debug_attempts << " attempt(s); unfixable: "
    << (dead.run.outcome ? dead.run.outcome->diagnostics.substr(0, 15) : "no outcome") << " with " << logged
    << " attempts logged";
  return {repaired && exhausted, d.str()};
}

Line escalation() {
  ec::EscalationPolicy policy;
  bool grid = true;
  for (int c = 1; c <= 5; ++c) grid = grid && ec::should_escalate(c, policy) == (c < 4);
  grid = grid && ec::should_escalate(std::nullopt, policy);

  // Pipeline level: c1 states no confidence, c2 states 3, c4 keeps 5.
  json answers = ju::read_file(kData / "answers" / "factory.json");
  answers["formulate_clause:c1"].erase("confidence");
  answers["formulate_clause:c2"]["confidence"] = 3;
  fs::path tmp = fs::temp_directory_path() / "nlmilp_acceptance_escalation.json";
  ju::write_file(tmp, answers);
  pipeline::RunConfig c;
  c.backend.kind = llm::BackendSpec::Kind::kAnswers;
  c.backend.answers = {(kData / "answers" / "defaults.json").string(), tmp.string()};
  c.escalation.route = ec::Route::kUser;
  auto r = eval::run_instance(instance("factory"), c, kData);
  fs::remove(tmp);
  std::set<std::string> targets;
  for (const auto& rv : r.run.reviews) targets.insert(rv.target);
  bool pipeline_ok = targets == std::set<std::string>{"c1", "c2"};
  std::string got;
  for (const auto& t : targets) got += (got.empty() ? "" : " ") + t;
  return {grid && pipeline_ok, std::string("threshold grid ") + (grid ? "ok" : "wrong") + "; reviews for " + got};
}

Line sifting() {
  auto t0 = std::chrono::steady_clock::now();
  int match = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    sift::StandardForm f = oracle::random_standard_lp(10, 200, seed);
    Solution full = duality.solve_lp(sift::to_ground(f), "sift lp " + std::to_string(seed));
    sift::SiftConfig cfg;
    cfg.seed = seed;
    cfg.init_k = 20;
    sift::SiftResult r = sift::sift_columns(f, cfg);
    if (full.status == SolveStatus::kOptimal && r.solution.status == SolveStatus::kOptimal) {
      double diff = std::fabs(*r.solution.objective - *full.objective);
      worst = std::max(worst, diff);
      match += diff <= 1e-6;
    }
  }
  GroundModel g = read_lp_file((kData / "models" / "scuc_like.lp").string());
  Solution full = duality.solve_lp(g, "scuc");
  sift::SiftResult r = sift::sift_constraints(g, {});
  bool scuc = full.status == SolveStatus::kOptimal && r.solution.status == SolveStatus::kOptimal &&
              close(*r.solution.objective, *full.objective) && r.active.size() * 2 < static_cast<std::size_t>(g.num_rows()) &&
              check_feasibility(g, r.solution.primal).feasible;
  double secs = seconds_since(t0);
  std::ostringstream d;
  d << match << "/50 column-sift LPs match (worst " << worst << "); SCUC " << r.active.size() << "/" << g.num_rows()
    << " rows active, objective " << (r.solution.objective ? format_number(*r.solution.objective) : "-") << " vs "
    << (full.objective ? format_number(*full.objective) : "-") << "; " << secs << " s";
  return {match == 50 && scuc && secs < 60.0, d.str()};
}

Line structure_soundness() {
  std::string detail;
  bool sound = true;
  for (std::string id : {"facility", "crew"}) {
    auto r = eval::run_instance(instance(id), scripted("suite_clean.json"), kData);
    if (!r.run.model || !r.run.model->has_annotations()) {
      sound = false;
      detail += id + " has no annotations; ";
      continue;
    }
    Solution a = nlmilp::solve(*r.run.model);
    Solution b = nlmilp::solve(lower_annotations(*r.run.model, LoweringOptions{}));
    bool ok = a.status == SolveStatus::kOptimal && b.status == SolveStatus::kOptimal &&
              std::fabs(*a.objective - *b.objective) <= 1e-6;
    sound = sound && ok;
    detail += id + " " + (a.objective ? format_number(*a.objective) : "-") + " vs lowered " +
              (b.objective ? format_number(*b.objective) : "-") + "; ";
  }
  State s = oracle::structure_toy_state();
  auto bad = oracle::invalid_proposals(99, 1000);
  int rejected = 0;
  for (const auto& p : bad) rejected += !structure::verify_proposal(s, p).accepted;
  int accepted = 0;
  auto good = oracle::valid_proposals();
  for (const auto& p : good) accepted += structure::verify_proposal(s, p).accepted;
  detail += std::to_string(rejected) + "/" + std::to_string(bad.size()) + " invalid proposals rejected, " +
            std::to_string(accepted) + "/" + std::to_string(good.size()) + " valid accepted";
  return {sound && rejected == static_cast<int>(bad.size()) && accepted == static_cast<int>(good.size()), detail};
}

Line equivalence() {
  auto t0 = std::chrono::steady_clock::now();
  auto corpus = oracle::equivalence_corpus(7, 200);
  int agree = 0, yes = 0;
  for (const auto& c : corpus) {
    auto ga = equiv::to_graph(c.a), gb = equiv::to_graph(c.b);
    auto r = equiv::check_equivalence(ga, gb);
    bool truth = c.graphs ? oracle::brute_force_isomorphic(c.graphs->first, c.graphs->second)
                          : oracle::brute_force_equivalent(c.a, c.b).has_value();
    bool witness_ok = !r.equivalent || equiv::verify_correspondence(ga, gb, r.correspondence).empty();
    agree += r.equivalent == truth && witness_ok;
    yes += truth;
  }
  double secs = seconds_since(t0);
  std::ostringstream d;
  d << agree << "/" << corpus.size() << " agree with brute force (" << yes << " equivalent) in " << secs << " s";
  return {agree == static_cast<int>(corpus.size()) && corpus.size() == 200 && secs < 60.0, d.str()};
}

Line lp_round_trip() {
  int identical = 0, annotated = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    GroundModel m = oracle::random_annotated_model(seed);
    annotated += !m.sos.empty() || !m.indicators.empty();
    identical += parse_lp(write_lp(m)) == m;
  }
  int golden = 0, golden_ok = 0;
  for (const auto& e : fs::directory_iterator(kTests / "golden")) {
    if (e.path().extension() != ".lp") continue;
    ++golden;
    std::string text = ju::read_text(e.path());
    golden_ok += write_lp(parse_lp(text)) == text;
  }
  std::ostringstream d;
  d << identical << "/50 random models identical (" << annotated << " annotated); " << golden_ok << "/" << golden
    << " golden files byte-equal";
  return {identical == 50 && golden > 0 && golden_ok == golden, d.str()};
}

Line state_properties() {
  int ok = 0;
  std::string first;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    State s = oracle::random_state(seed);
    if (seed % 2 == 0) oracle::mutate_state(s, seed * 7919);
    bool good = true;
    try {
      s.validate();
      std::set<std::string> clauses, symbols;
      for (const auto& c : s.clauses()) good = good && clauses.insert(c.id).second;
      for (const auto& p : s.parameters()) good = good && symbols.insert(p.symbol).second;
      for (const auto& v : s.variables()) good = good && symbols.insert(v.symbol).second;
      std::set<Edge> seen;
      for (const auto& [c, sym] : s.graph().edges()) {
        good = good && clauses.count(c) && symbols.count(sym) && seen.insert({c, sym}).second;
      }
      good = good && state_from_json(json::parse(state_to_json(s).dump())) == s;
      for (const auto& c : s.clauses()) {
        std::set<std::string> scan, ctx;
        for (const auto& [cid, sym] : s.graph().edges()) {
          if (cid == c.id) scan.insert(sym);
        }
        ClauseContext cc = s.context_for(c.id);
        for (const auto& p : cc.parameters) ctx.insert(p.symbol);
        for (const auto& v : cc.variables) ctx.insert(v.symbol);
        good = good && scan == ctx;
      }
    } catch (const std::exception& e) {
      good = false;
    }
    ok += good;
    if (!good && first.empty()) first = " (first failure: seed " + std::to_string(seed) + ")";
  }
  return {ok == 1000, std::to_string(ok) + "/1000 generated states hold every invariant" + first};
}

Line strong_duality() {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    duality.solve_lp(oracle::random_bounded_lp(3 + seed % 6, 4 + seed % 9, seed), "bounded " + std::to_string(seed));
  }
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    duality.solve_lp(oracle::random_covering_lp(8, 20, seed), "covering " + std::to_string(seed));
  }
  duality.solve_lp(read_lp_file((kData / "reference" / "factory.lp").string()), "factory");
  std::ostringstream d;
  d << duality.solves - duality.failures << "/" << duality.solves << " continuous solves within 1e-6 (worst relative gap "
    << duality.worst << ")";
  if (!duality.first_failure.empty()) d << "; first failure " << duality.first_failure;
  return {duality.failures == 0 && duality.solves > 0, d.str()};
}

Line ablation() {
  auto suite = eval::load_suite(kData / "instances");
  auto full = eval::run_suite(suite, scripted("suite_fault.json"), {}, kData);
  eval::Ablation a;
  eval::set_ablation(a, "disable_debug");
  auto cut = eval::run_suite(suite, scripted("suite_fault.json"), a, kData);
  std::string stage;
  for (const auto& r : cut.records) {
    if (!r.solved) stage += (stage.empty() ? "" : " ") + r.id + ":" + r.failure_stage;
  }
  std::ostringstream d;
  d << "full " << full.solved << "/" << full.total << ", disable_debug " << cut.solved << "/" << cut.total
    << " (failed " << stage << ")";
  return {full.solved == 3 && full.total == 3 && cut.solved == 2 && stage == "factory:Coding", d.str()};
}

}  // namespace

int main() {
  report("end-to-end", end_to_end);
  report("debug-loop", debug_loop);
  report("escalation", escalation);
  report("sifting", sifting);
  report("structure-soundness", structure_soundness);
  report("equivalence", equivalence);
  report("lp-round-trip", lp_round_trip);
  report("state-properties", state_properties);
  // Runs last: it also counts the continuous solves made by the sifting check.
  report("strong-duality", strong_duality);
  report("ablation", ablation);
  return failed == 0 ? 0 : 1;
}
