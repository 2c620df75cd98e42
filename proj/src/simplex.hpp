#pragma once

// Internal LP core shared by the simplex engine and branch and bound.

#include <chrono>
#include <vector>

#include "nlmilp/model.hpp"
#include "nlmilp/solver.hpp"

namespace nlmilp::detail {

// min c'x  s.t.  rows,  lb <= x <= ub
struct LpProblem {
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Row> rows;
};

struct LpResult {
  SolveStatus status = SolveStatus::kError;
  double objective = 0.0;
  std::vector<double> x;
  std::vector<double> duals;          // per row, for the min problem
  std::vector<double> reduced_costs;  // per column
  long iterations = 0;
  std::string message;
};

struct LpOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  long iteration_limit = 1000000;
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();
};

LpResult solve_lp(const LpProblem& problem, const LpOptions& options);

}  // namespace nlmilp::detail
