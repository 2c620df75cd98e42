// Bounded-variable revised simplex, two phases, dense basis inverse.
//
// Every row gets a slack (Ax + s = b) whose bounds encode the row sense. Rows
// whose slack cannot absorb the initial residual get an artificial column;
// phase 1 minimizes the sum of artificials, which are then fixed at zero.

#include "simplex.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace nlmilp::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr int kRefactorEvery = 64;
constexpr int kDegenerateSwitch = 60;

struct Entry {
  int row;
  double val;
};

enum class Where { kBasic, kLower, kUpper, kFree };

class Simplex {
 public:
  Simplex(const LpProblem& p, const LpOptions& o) : p_(p), o_(o) {
    n_ = static_cast<int>(p.cost.size());
    m_ = static_cast<int>(p.rows.size());
    cols_.assign(n_ + m_, {});
    for (int i = 0; i < m_; ++i) {
      const Row& r = p.rows[i];
      for (std::size_t k = 0; k < r.cols.size(); ++k) {
        if (r.vals[k] != 0.0) cols_[r.cols[k]].push_back({i, r.vals[k]});
      }
      cols_[n_ + i].push_back({i, 1.0});
      b_.push_back(r.rhs);
    }
    lb_ = p.lower;
    ub_ = p.upper;
    for (int i = 0; i < m_; ++i) {
      switch (p.rows[i].sense) {
        case Relation::kLessEqual: lb_.push_back(0.0); ub_.push_back(kInf); break;
        case Relation::kGreaterEqual: lb_.push_back(-kInf); ub_.push_back(0.0); break;
        case Relation::kEqual: lb_.push_back(0.0); ub_.push_back(0.0); break;
      }
    }
  }

  LpResult run();

 private:
  int total() const { return static_cast<int>(cols_.size()); }

  void place_nonbasic(int j) {
    if (std::isfinite(lb_[j])) {
      where_[j] = Where::kLower;
      x_[j] = lb_[j];
    } else if (std::isfinite(ub_[j])) {
      where_[j] = Where::kUpper;
      x_[j] = ub_[j];
    } else {
      where_[j] = Where::kFree;
      x_[j] = 0.0;
    }
  }

  bool refactor();
  void recompute_basics();
  // Returns kOptimal, kUnbounded, kTimeLimit or kError.
  SolveStatus iterate(const std::vector<double>& cost);
  Eigen::VectorXd duals(const std::vector<double>& cost) const;

  const LpProblem& p_;
  const LpOptions& o_;
  int n_ = 0;
  int m_ = 0;
  std::vector<std::vector<Entry>> cols_;
  std::vector<double> b_;
  std::vector<double> lb_, ub_;
  std::vector<double> x_;
  std::vector<Where> where_;
  std::vector<int> head_;  // basic column per row position
  Eigen::MatrixXd binv_;
  long iterations_ = 0;
  std::string message_;
};

bool Simplex::refactor() {
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m_, m_);
  for (int k = 0; k < m_; ++k) {
    for (const Entry& e : cols_[head_[k]]) basis(e.row, k) = e.val;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
  binv_ = lu.inverse();
  return binv_.allFinite();
}

void Simplex::recompute_basics() {
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b_.data(), m_);
  for (int j = 0; j < total(); ++j) {
    if (where_[j] == Where::kBasic || x_[j] == 0.0) continue;
    for (const Entry& e : cols_[j]) rhs(e.row) -= e.val * x_[j];
  }
  Eigen::VectorXd xb = binv_ * rhs;
  for (int k = 0; k < m_; ++k) x_[head_[k]] = xb(k);
}

Eigen::VectorXd Simplex::duals(const std::vector<double>& cost) const {
  Eigen::VectorXd cb(m_);
  for (int k = 0; k < m_; ++k) cb(k) = cost[head_[k]];
  return binv_.transpose() * cb;
}

SolveStatus Simplex::iterate(const std::vector<double>& cost) {
  int degenerate = 0;
  int since_refactor = 0;
  Eigen::VectorXd alpha(m_);
  while (true) {
    if (iterations_ >= o_.iteration_limit) {
      message_ = "iteration limit reached";
      return SolveStatus::kTimeLimit;
    }
    if ((iterations_ & 15) == 0 && std::chrono::steady_clock::now() > o_.deadline) {
      message_ = "time limit reached";
      return SolveStatus::kTimeLimit;
    }
    if (since_refactor >= kRefactorEvery) {
      if (!refactor()) {
        message_ = "singular basis";
        return SolveStatus::kError;
      }
      recompute_basics();
      since_refactor = 0;
    }
    Eigen::VectorXd y = duals(cost);
    const bool bland = degenerate >= kDegenerateSwitch;
    int enter = -1;
    int dir = 0;
    double best = 0.0;
    for (int j = 0; j < total(); ++j) {
      Where w = where_[j];
      if (w == Where::kBasic || lb_[j] == ub_[j]) continue;
      double d = cost[j];
      for (const Entry& e : cols_[j]) d -= e.val * y(e.row);
      int cand = 0;
      if ((w == Where::kLower || w == Where::kFree) && d < -o_.optimality_tol) cand = 1;
      if ((w == Where::kUpper || w == Where::kFree) && d > o_.optimality_tol) cand = -1;
      if (cand == 0) continue;
      if (bland) {
        enter = j;
        dir = cand;
        break;
      }
      if (std::fabs(d) > best) {
        best = std::fabs(d);
        enter = j;
        dir = cand;
      }
    }
    if (enter < 0) return SolveStatus::kOptimal;

    alpha.setZero();
    for (const Entry& e : cols_[enter]) alpha += e.val * binv_.col(e.row);

    // Harris ratio test: loosen bounds by the tolerance, then pick the
    // largest pivot among rows that block within the loosened step.
    const double tol = o_.feasibility_tol;
    double harris = kInf;
    for (int k = 0; k < m_; ++k) {
      double delta = -dir * alpha(k);
      int j = head_[k];
      if (delta < -kPivotTol && std::isfinite(lb_[j])) {
        harris = std::min(harris, (x_[j] - lb_[j] + tol) / -delta);
      } else if (delta > kPivotTol && std::isfinite(ub_[j])) {
        harris = std::min(harris, (ub_[j] - x_[j] + tol) / delta);
      }
    }
    int leave = -1;
    double step = kInf;
    double pivot = 0.0;
    if (std::isfinite(harris)) {
      for (int k = 0; k < m_; ++k) {
        double delta = -dir * alpha(k);
        int j = head_[k];
        double t = kInf;
        if (delta < -kPivotTol && std::isfinite(lb_[j])) {
          t = (x_[j] - lb_[j]) / -delta;
        } else if (delta > kPivotTol && std::isfinite(ub_[j])) {
          t = (ub_[j] - x_[j]) / delta;
        }
        if (t <= harris && std::fabs(delta) > pivot) {
          pivot = std::fabs(delta);
          leave = k;
          step = std::max(0.0, t);
        }
      }
    }
    double range = ub_[enter] - lb_[enter];
    if (leave < 0 && !std::isfinite(range)) return SolveStatus::kUnbounded;
    ++iterations_;
    ++since_refactor;
    if (std::isfinite(range) && range <= step) {
      // Bound flip, no basis change.
      for (int k = 0; k < m_; ++k) x_[head_[k]] -= dir * alpha(k) * range;
      x_[enter] = dir > 0 ? ub_[enter] : lb_[enter];
      where_[enter] = dir > 0 ? Where::kUpper : Where::kLower;
      degenerate = 0;
      continue;
    }
    degenerate = step < 1e-12 ? degenerate + 1 : 0;
    for (int k = 0; k < m_; ++k) x_[head_[k]] -= dir * alpha(k) * step;
    x_[enter] += dir * step;
    int out = head_[leave];
    double delta = -dir * alpha(leave);
    if (delta < 0) {
      x_[out] = lb_[out];
      where_[out] = Where::kLower;
    } else {
      x_[out] = ub_[out];
      where_[out] = Where::kUpper;
    }
    head_[leave] = enter;
    where_[enter] = Where::kBasic;
    Eigen::RowVectorXd pivot_row = binv_.row(leave) / alpha(leave);
    binv_.noalias() -= alpha * pivot_row;
    binv_.row(leave) = pivot_row;
  }
}

LpResult Simplex::run() {
  LpResult result;
  for (int j = 0; j < n_; ++j) {
    if (lb_[j] > ub_[j]) {
      result.status = SolveStatus::kInfeasible;
      result.message = "column with lower bound above upper bound";
      return result;
    }
  }
  x_.assign(n_ + m_, 0.0);
  where_.assign(n_ + m_, Where::kLower);
  for (int j = 0; j < n_; ++j) place_nonbasic(j);
  head_.assign(m_, -1);
  std::vector<double> residual = b_;
  for (int j = 0; j < n_; ++j) {
    if (x_[j] == 0.0) continue;
    for (const Entry& e : cols_[j]) residual[e.row] -= e.val * x_[j];
  }
  int artificials = 0;
  for (int i = 0; i < m_; ++i) {
    int slack = n_ + i;
    double r = residual[i];
    if (r >= lb_[slack] - o_.feasibility_tol && r <= ub_[slack] + o_.feasibility_tol) {
      head_[i] = slack;
      where_[slack] = Where::kBasic;
      x_[slack] = r;
      continue;
    }
    place_nonbasic(slack);
    double rest = r - x_[slack];
    int a = total();
    cols_.push_back({{i, rest >= 0 ? 1.0 : -1.0}});
    lb_.push_back(0.0);
    ub_.push_back(kInf);
    x_.push_back(std::fabs(rest));
    where_.push_back(Where::kBasic);
    head_[i] = a;
    ++artificials;
  }
  if (!refactor()) {
    result.message = "singular initial basis";
    return result;
  }

  if (artificials > 0) {
    std::vector<double> cost(total(), 0.0);
    for (int j = n_ + m_; j < total(); ++j) cost[j] = 1.0;
    SolveStatus s = iterate(cost);
    if (s == SolveStatus::kTimeLimit || s == SolveStatus::kError) {
      result.status = s;
      result.message = message_;
      result.iterations = iterations_;
      return result;
    }
    refactor();
    recompute_basics();
    double infeasibility = 0.0;
    for (int j = n_ + m_; j < total(); ++j) infeasibility += std::fabs(x_[j]);
    double scale = 1.0;
    for (double v : b_) scale = std::max(scale, std::fabs(v));
    if (infeasibility > 1e-7 * scale) {
      result.status = SolveStatus::kInfeasible;
      result.message = "phase 1 ended with infeasibility " + format_number(infeasibility);
      result.iterations = iterations_;
      return result;
    }
    for (int j = n_ + m_; j < total(); ++j) {
      ub_[j] = 0.0;
      if (where_[j] != Where::kBasic) {
        where_[j] = Where::kLower;
        x_[j] = 0.0;
      }
    }
  }

  std::vector<double> cost(total(), 0.0);
  std::copy(p_.cost.begin(), p_.cost.end(), cost.begin());
  SolveStatus s = iterate(cost);
  result.iterations = iterations_;
  if (s != SolveStatus::kOptimal) {
    result.status = s;
    result.message = s == SolveStatus::kUnbounded ? "objective unbounded below" : message_;
    return result;
  }
  refactor();
  recompute_basics();
  Eigen::VectorXd y = duals(cost);
  result.status = SolveStatus::kOptimal;
  result.x.assign(x_.begin(), x_.begin() + n_);
  // Snap tiny bound violations left by the tolerance-based ratio test.
  for (int j = 0; j < n_; ++j) {
    if (result.x[j] < lb_[j]) result.x[j] = lb_[j];
    if (result.x[j] > ub_[j]) result.x[j] = ub_[j];
  }
  result.duals.assign(y.data(), y.data() + m_);
  result.reduced_costs.resize(n_);
  result.objective = 0.0;
  for (int j = 0; j < n_; ++j) {
    double d = p_.cost[j];
    for (const Entry& e : cols_[j]) d -= e.val * y(e.row);
    result.reduced_costs[j] = d;
    result.objective += p_.cost[j] * result.x[j];
  }
  return result;
}

}  // namespace

LpResult solve_lp(const LpProblem& problem, const LpOptions& options) {
  if (problem.rows.empty()) {
    // No rows: each column sits at its cheaper bound.
    LpResult r;
    r.status = SolveStatus::kOptimal;
    for (std::size_t j = 0; j < problem.cost.size(); ++j) {
      double c = problem.cost[j];
      double lo = problem.lower[j], hi = problem.upper[j];
      if (lo > hi) {
        r.status = SolveStatus::kInfeasible;
        r.message = "column with lower bound above upper bound";
        return r;
      }
      double v;
      if (c > 0) {
        v = lo;
      } else if (c < 0) {
        v = hi;
      } else {
        v = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
      }
      if (!std::isfinite(v)) {
        r.status = SolveStatus::kUnbounded;
        r.message = "objective unbounded below";
        return r;
      }
      r.x.push_back(v);
      r.reduced_costs.push_back(c);
      r.objective += c * v;
    }
    return r;
  }
  Simplex s(problem, options);
  return s.run();
}

}  // namespace nlmilp::detail
