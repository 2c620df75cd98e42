#include <gtest/gtest.h>

#include <cmath>

#include "nlmilp/error.hpp"
#include "nlmilp/sifting.hpp"
#include "oracles.hpp"

using namespace nlmilp;
using namespace nlmilp::sift;

namespace {

double full_objective(const StandardForm& f) {
  Solution s = solve(to_ground(f));
  EXPECT_EQ(s.status, SolveStatus::kOptimal);
  return s.objective.value_or(NAN);
}

void expect_feasible(const StandardForm& f, const std::vector<double>& x) {
  std::vector<double> act(f.rows, 0.0);
  for (int j = 0; j < f.num_cols(); ++j) {
    EXPECT_GE(x[j], -1e-9);
    for (const auto& [i, a] : f.columns[j]) act[i] += a * x[j];
  }
  for (int i = 0; i < f.rows; ++i) EXPECT_NEAR(act[i], f.b[i], 1e-6);
}

}  // namespace

TEST(Pricing, AllActiveGivesEmptySet) {
  StandardForm f = oracle::random_standard_lp(4, 12, 3);
  std::vector<int> all(12);
  for (int j = 0; j < 12; ++j) all[j] = j;
  EXPECT_TRUE(price_columns(f, all, {1, -2, 3, 0.5}).empty());
}

TEST(Pricing, ZeroDualsWithNonNegativeCosts) {
  StandardForm f = oracle::random_standard_lp(4, 12, 4);
  EXPECT_TRUE(price_columns(f, {0}, std::vector<double>(4, 0.0)).empty());
}

TEST(Pricing, MatchesDenseScan) {
  StandardForm f = oracle::random_standard_lp(10, 200, 11);
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) y.push_back(std::sin(i + 1.0) * 3.0);
  std::vector<int> active{0, 5, 17, 80};
  auto priced = price_columns(f, active, y, 1e-7);
  auto d = oracle::dense_reduced_costs(f, y);
  std::vector<int> expect;
  for (int j = 0; j < 200; ++j) {
    if (std::find(active.begin(), active.end(), j) == active.end() && d[j] < -1e-7) expect.push_back(j);
  }
  std::vector<int> got = priced;
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, expect);
  for (std::size_t k = 1; k < priced.size(); ++k) EXPECT_LE(d[priced[k - 1]], d[priced[k]]);
}

TEST(Pricing, MissingDuals) {
  StandardForm f = oracle::random_standard_lp(3, 5, 1);
  try {
    price_columns(f, {0}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingDuals);
  }
}

TEST(SiftColumns, AllColumnsIsOneIteration) {
  StandardForm f = oracle::random_standard_lp(5, 30, 2);
  SiftConfig cfg;
  for (int j = 0; j < 30; ++j) cfg.initial.push_back(j);
  SiftResult r = sift_columns(f, cfg);
  ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_NEAR(*r.solution.objective, full_objective(f), 1e-6);
}

TEST(SiftColumns, Seed7MatchesFullSolve) {
  StandardForm f = oracle::random_standard_lp(10, 200, 7);
  SiftConfig cfg;
  cfg.init_k = 20;
  cfg.seed = 7;
  SiftResult r = sift_columns(f, cfg);
  ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
  EXPECT_NEAR(*r.solution.objective, full_objective(f), 1e-6);
  EXPECT_LT(r.active.size(), 200u);
  EXPECT_EQ(r.stop, "priced-out");
  expect_feasible(f, r.solution.primal);
}

TEST(SiftColumns, BatchCapSameObjectiveMoreIterations) {
  StandardForm f = oracle::random_standard_lp(10, 200, 7);
  SiftConfig cfg;
  cfg.init_k = 20;
  cfg.seed = 7;
  SiftResult free_run = sift_columns(f, cfg);
  cfg.batch_cap = 5;
  SiftResult capped = sift_columns(f, cfg);
  EXPECT_NEAR(*capped.solution.objective, *free_run.solution.objective, 1e-6);
  EXPECT_GE(capped.history.size(), free_run.history.size());
  for (std::size_t k = 1; k < capped.history.size(); ++k) {
    EXPECT_GT(capped.history[k].active, capped.history[k - 1].active);
  }
}

TEST(SiftColumns, MonotoneObjectiveAndGrowingSet) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    StandardForm f = oracle::random_standard_lp(10, 200, seed);
    SiftConfig cfg;
    cfg.init_k = 20;
    cfg.seed = seed;
    SiftResult r = sift_columns(f, cfg);
    ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
    double prev = INFINITY;
    int prev_n = 0;
    for (const auto& h : r.history) {
      EXPECT_GT(h.active, prev_n);
      prev_n = h.active;
      if (std::isfinite(h.objective)) {
        EXPECT_LE(h.objective, prev + 1e-7);
        prev = h.objective;
      }
    }
    EXPECT_LE(static_cast<int>(r.history.size()), 200);
  }
}

TEST(SiftColumns, StrongDualityOnResult) {
  StandardForm f = oracle::random_standard_lp(10, 200, 5);
  SiftConfig cfg;
  cfg.init_k = 15;
  SiftResult r = sift_columns(f, cfg);
  ASSERT_TRUE(r.solution.duals);
  double by = 0.0;
  for (int i = 0; i < f.rows; ++i) by += f.b[i] * (*r.solution.duals)[i];
  EXPECT_NEAR(by, *r.solution.objective, 1e-6);
  for (double d : *r.solution.reduced_costs) EXPECT_GE(d, -1e-7);
}

TEST(SiftColumns, InfeasibleFullProblem) {
  StandardForm f;
  f.rows = 1;
  f.c = {1, 1};
  f.columns = {{{0, 1.0}}, {{0, 2.0}}};
  f.b = {-1};
  SiftResult r = sift_columns(f, {});
  EXPECT_EQ(r.solution.status, SolveStatus::kInfeasible);
}

TEST(SiftColumns, RestrictedInfeasibleWithoutFallback) {
  // x0 alone cannot reach b; the augment picks x1 but row 1 needs x2 too.
  StandardForm f;
  f.rows = 2;
  f.c = {1, 1, 1, 1};
  f.columns = {{{0, 1.0}}, {{0, 1.0}, {1, 1.0}}, {{1, -1.0}}, {{1, 1.0}}};
  f.b = {1, 3};
  SiftConfig cfg;
  cfg.initial = {0};
  cfg.phase1_fallback = false;
  try {
    SiftResult r = sift_columns(f, cfg);
    // augment alone may have fixed it
    EXPECT_EQ(r.solution.status, SolveStatus::kOptimal);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRestrictedInfeasible);
  }
}

TEST(SiftColumns, RejectsEngineWithoutDuals) {
  struct NoDuals : Engine {
    std::string id() const override { return "nodual"; }
    EngineCapabilities capabilities() const override { return {}; }
    Solution solve_native(const GroundModel&, const SolverParams&) const override { return {}; }
  } engine;
  try {
    sift_columns(oracle::random_standard_lp(2, 4, 1), {}, engine);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEngineUnavailable);
  }
}

TEST(SiftColumns, ConfigChecks) {
  SiftConfig cfg;
  cfg.init_k = 0;
  EXPECT_THROW(check_config(cfg), Error);
  cfg.init_k = 1;
  cfg.epsilon = 0;
  EXPECT_THROW(check_config(cfg), Error);
}

TEST(SiftColumns, IterationLimit) {
  StandardForm f = oracle::random_standard_lp(10, 200, 7);
  SiftConfig cfg;
  cfg.init_k = 10;
  cfg.batch_cap = 1;
  cfg.max_iterations = 2;
  try {
    sift_columns(f, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIterationLimit);
  }
}

TEST(SiftColumns, GapStopWithUpperBounds) {
  StandardForm f = oracle::random_standard_lp(10, 200, 9);
  f.upper.assign(200, 10.0);
  SiftConfig cfg;
  cfg.init_k = 20;
  cfg.gap_stop = 1e9;  // any finite bound stops right away
  SiftResult r = sift_columns(f, cfg);
  ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
  EXPECT_TRUE(r.stop == "gap" || r.stop == "priced-out");
  ASSERT_TRUE(r.gap);
  EXPECT_LE(*r.solution.stats.best_bound, *r.solution.objective + 1e-9);
}

TEST(StandardFormConversion, RoundTripOptimum) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    GroundModel g = oracle::random_bounded_lp(6, 8, seed);
    Solution direct = solve(g);
    ASSERT_EQ(direct.status, SolveStatus::kOptimal) << seed;
    StandardFormConversion conv = to_standard_form(g);
    SiftResult r = sift_columns(conv.form, {});
    ASSERT_EQ(r.solution.status, SolveStatus::kOptimal) << seed;
    EXPECT_NEAR(conv.sense_sign * *r.solution.objective, *direct.objective, 1e-6) << seed;
    auto x = conv.to_source(r.solution.primal);
    EXPECT_TRUE(check_feasibility(g, x).feasible) << seed;
    EXPECT_NEAR(objective_value(g, x), *direct.objective, 1e-6) << seed;
  }
}

TEST(SiftConstraints, AllRowsIsOneIteration) {
  GroundModel g = oracle::random_covering_lp(30, 8, 1);
  SiftConfig cfg;
  for (int i = 0; i < 30; ++i) cfg.initial.push_back(i);
  SiftResult r = sift_constraints(g, cfg);
  EXPECT_EQ(r.history.size(), 1u);
}

TEST(SiftConstraints, Covering300x12) {
  GroundModel g = oracle::random_covering_lp(300, 12, 42);
  Solution full = solve(g);
  ASSERT_EQ(full.status, SolveStatus::kOptimal);
  SiftConfig cfg;
  cfg.init_k = 12;
  SiftResult r = sift_constraints(g, cfg);
  ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
  EXPECT_NEAR(*r.solution.objective, *full.objective, 1e-6);
  for (const Row& row : g.rows) EXPECT_GE(row_activity(row, r.solution.primal), 1.0 - 1e-6);
  EXPECT_EQ(r.stop, "no-violation");
  for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_GT(r.history[k].active, r.history[k - 1].active);
}

TEST(SiftConstraints, UnboundedRestrictionGrows) {
  // x free above until the second row joins.
  GroundModel g;
  g.sense = Sense::kMaximize;
  g.add_column("x", 1.0, 0.0, kInfinity, false);
  g.add_column("y", 1.0, 0.0, kInfinity, false);
  g.add_row({"a", {0}, {1.0}, Relation::kLessEqual, 4.0});
  g.add_row({"b", {1}, {1.0}, Relation::kLessEqual, 3.0});
  SiftConfig cfg;
  cfg.initial = {0};
  SiftResult r = sift_constraints(g, cfg);
  ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
  EXPECT_NEAR(*r.solution.objective, 7.0, 1e-9);
}

TEST(SiftConstraints, IncumbentGapStop) {
  GroundModel g = oracle::random_covering_lp(200, 10, 3);
  Solution full = solve(g);
  SiftConfig cfg;
  cfg.init_k = 5;
  cfg.incumbent = *full.objective;
  cfg.gap_stop = 0.5;
  SiftResult r = sift_constraints(g, cfg);
  ASSERT_TRUE(r.gap);
  EXPECT_TRUE(r.stop == "gap" || r.stop == "no-violation");
  if (r.stop == "gap") EXPECT_LE(*r.gap, 0.5);
}

TEST(SiftHistory, Csv) {
  std::vector<IterationRecord> h{{1, 20, 3.5, 4, 0.01, ""}, {2, 24, 3.0, 0, 0.02, "x"}};
  std::string csv = history_csv(h);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,active,objective,added,seconds,note");
  EXPECT_NE(csv.find("2,24,3,0,0.02,x"), std::string::npos);
}

TEST(SiftConstraints, ScucLikeInstance) {
  GroundModel g = read_lp_file(std::string(NLMILP_DATA_DIR) + "/models/scuc_like.lp");
  ASSERT_GT(g.num_rows(), g.num_cols());
  Solution full = solve(g);
  ASSERT_EQ(full.status, SolveStatus::kOptimal);
  SiftConfig cfg;
  cfg.init_k = 24;
  SiftResult r = sift_constraints(g, cfg);
  ASSERT_EQ(r.solution.status, SolveStatus::kOptimal);
  EXPECT_NEAR(*r.solution.objective, *full.objective, 1e-6 * std::max(1.0, std::fabs(*full.objective)));
  EXPECT_LT(r.active.size() * 2, static_cast<std::size_t>(g.num_rows()));
  EXPECT_TRUE(check_feasibility(g, r.solution.primal).feasible);
}
