#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "nlmilp/error.hpp"
#include "nlmilp/solver.hpp"
#include "oracles.hpp"

using namespace nlmilp;

namespace {

const std::string kData = NLMILP_DATA_DIR;

bool highs_available() {
  static const bool ok = std::system("python3 -c 'import highspy' >/dev/null 2>&1") == 0;
  return ok;
}

void expect_strong_duality(const GroundModel& m, const Solution& s) {
  ASSERT_EQ(s.status, SolveStatus::kOptimal) << s.message;
  ASSERT_TRUE(s.duals && s.reduced_costs);
  EXPECT_NEAR(*s.objective, dual_objective(m, s), 1e-6 * std::max(1.0, std::abs(*s.objective)));
  EXPECT_LE(dual_infeasibility(m, s), 1e-6);
  EXPECT_TRUE(check_feasibility(m, s.primal).feasible);
}

}  // namespace

TEST(Solver, StrongDualityRandomBoundedLps) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SCOPED_TRACE(seed);
    GroundModel m = oracle::random_bounded_lp(3 + seed % 6, 4 + seed % 9, seed);
    expect_strong_duality(m, solve(m));
  }
}

TEST(Solver, StrongDualityCoveringLps) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SCOPED_TRACE(seed);
    GroundModel m = oracle::random_covering_lp(8, 20, seed);
    expect_strong_duality(m, solve(m));
  }
}

TEST(Solver, StrongDualityFactoryReference) {
  GroundModel m = read_lp_file(kData + "/reference/factory.lp");
  ASSERT_TRUE(m.is_continuous());
  Solution s = solve(m);
  expect_strong_duality(m, s);
  EXPECT_NEAR(*s.objective, 2000.0, 1e-6);
}

TEST(Solver, DualObjectiveNeedsDuals) {
  GroundModel m = read_lp_file(kData + "/reference/facility.lp");
  Solution s = solve(m);
  ASSERT_EQ(s.status, SolveStatus::kOptimal);
  EXPECT_FALSE(s.duals);
  EXPECT_THROW(dual_objective(m, s), Error);
}

TEST(Solver, MilpReferences) {
  Solution f = solve(read_lp_file(kData + "/reference/facility.lp"));
  ASSERT_EQ(f.status, SolveStatus::kOptimal);
  EXPECT_NEAR(*f.objective, 380.0, 1e-6);

  GroundModel crew = read_lp_file(kData + "/reference/crew.lp");
  ASSERT_FALSE(crew.sos.empty());
  Solution c = solve(crew);
  ASSERT_EQ(c.status, SolveStatus::kOptimal);
  EXPECT_NEAR(*c.objective, 163.0, 1e-6);
  EXPECT_TRUE(check_feasibility(crew, c.primal).feasible);
}

TEST(Solver, LoweredAnnotationsKeepOptimum) {
  for (std::string file : {"golden/facility_annotated.lp", "golden/crew_annotated.lp", "golden/bigm_sos2.lp",
                           "golden/semicont.lp"}) {
    SCOPED_TRACE(file);
    GroundModel m = read_lp_file(std::string(NLMILP_TEST_DIR) + "/" + file);
    GroundModel low = lower_annotations(m, LoweringOptions{});
    EXPECT_FALSE(low.has_annotations());
    Solution a = solve(m), b = solve(low);
    ASSERT_EQ(a.status, b.status);
    if (a.status == SolveStatus::kOptimal) {
      EXPECT_NEAR(*a.objective, *b.objective, 1e-6);
      EXPECT_TRUE(check_feasibility(m, a.primal).feasible);
    }
  }
}

TEST(Solver, InfeasibleAndUnbounded) {
  GroundModel inf;
  inf.add_column("x", 1, 0, 1, false);
  inf.add_row({"r", {0}, {1}, Relation::kGreaterEqual, 2});
  EXPECT_EQ(solve(inf).status, SolveStatus::kInfeasible);

  GroundModel unb;
  unb.sense = Sense::kMaximize;
  unb.add_column("x", 1, 0, INFINITY, false);
  unb.add_column("y", 0, 0, 1, false);
  unb.add_row({"r", {0, 1}, {-1, 1}, Relation::kLessEqual, 1});
  EXPECT_EQ(solve(unb).status, SolveStatus::kUnbounded);
}

TEST(Solver, UnknownEngine) {
  try {
    make_engine("cplex");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEngineUnavailable);
  }
}

TEST(Solver, SimplexAgreesWithHighs) {
  if (!highs_available()) GTEST_SKIP() << "highspy not installed";
  auto highs = make_engine("highs");
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SCOPED_TRACE(seed);
    GroundModel m = oracle::random_bounded_lp(5, 9, seed);
    Solution a = solve(m), b = solve(m, {}, *highs);
    ASSERT_EQ(b.status, SolveStatus::kOptimal) << b.message;
    EXPECT_NEAR(*a.objective, *b.objective, 1e-6 * std::max(1.0, std::abs(*a.objective)));
  }
  // SOS goes through lowering for HiGHS.
  GroundModel crew = read_lp_file(kData + "/reference/crew.lp");
  Solution c = solve(crew, {}, *highs);
  ASSERT_EQ(c.status, SolveStatus::kOptimal) << c.message;
  EXPECT_NEAR(*c.objective, 163.0, 1e-6);
  EXPECT_FALSE(c.lowering.empty());
}
