#include "nlmilp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <queue>

#include "nlmilp/error.hpp"
#include "simplex.hpp"

namespace nlmilp {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "Optimal";
    case SolveStatus::kInfeasible: return "Infeasible";
    case SolveStatus::kUnbounded: return "Unbounded";
    case SolveStatus::kError: return "Error";
    case SolveStatus::kTimeLimit: return "TimeLimit";
  }
  return "Error";
}

std::map<std::string, double> Solution::primal_by_name() const {
  std::map<std::string, double> out;
  for (std::size_t j = 0; j < primal.size() && j < names.size(); ++j) out[names[j]] = primal[j];
  return out;
}

namespace {

constexpr double kDualZero = 1e-9;

// Bound a nonbasic column sits at, judged from its reduced cost.
std::optional<double> dual_bound(const GroundModel& model, int j, double d) {
  bool at_lower = model.sense == Sense::kMinimize ? d > 0 : d < 0;
  double b = at_lower ? model.lower[j] : model.upper[j];
  if (!std::isfinite(b)) return std::nullopt;
  return b;
}

}  // namespace

double dual_objective(const GroundModel& model, const Solution& solution) {
  if (!solution.duals || !solution.reduced_costs) {
    throw Error(ErrorCode::kMissingDuals, "solution carries no duals");
  }
  const auto& y = *solution.duals;
  const auto& d = *solution.reduced_costs;
  double value = model.objective_offset;
  for (int i = 0; i < model.num_rows(); ++i) value += model.rows[i].rhs * y[i];
  for (int j = 0; j < model.num_cols(); ++j) {
    if (std::fabs(d[j]) <= kDualZero) continue;
    auto b = dual_bound(model, j, d[j]);
    if (!b) return model.sense == Sense::kMinimize ? -kInfinity : kInfinity;
    value += d[j] * *b;
  }
  return value;
}

double dual_infeasibility(const GroundModel& model, const Solution& solution) {
  if (!solution.duals || !solution.reduced_costs) {
    throw Error(ErrorCode::kMissingDuals, "solution carries no duals");
  }
  const double flip = model.sense == Sense::kMinimize ? 1.0 : -1.0;
  double worst = 0.0;
  for (int i = 0; i < model.num_rows(); ++i) {
    double y = flip * (*solution.duals)[i];
    if (model.rows[i].sense == Relation::kLessEqual) worst = std::max(worst, y);
    if (model.rows[i].sense == Relation::kGreaterEqual) worst = std::max(worst, -y);
  }
  for (int j = 0; j < model.num_cols(); ++j) {
    double d = flip * (*solution.reduced_costs)[j];
    if (d > 0 && !std::isfinite(model.lower[j])) worst = std::max(worst, d);
    if (d < 0 && !std::isfinite(model.upper[j])) worst = std::max(worst, -d);
  }
  return worst;
}

GroundModel relax(const GroundModel& model) {
  LoweringOptions only_pwl;
  only_pwl.indicators = only_pwl.sos = only_pwl.semicontinuous = false;
  GroundModel out = model.piecewise.empty() ? model : lower_annotations(model, only_pwl);
  std::fill(out.integer.begin(), out.integer.end(), false);
  out.sos.clear();
  out.indicators.clear();
  out.semicontinuous.clear();
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

detail::LpOptions lp_options(const SolverParams& params, Clock::time_point start) {
  detail::LpOptions o;
  o.iteration_limit = params.iteration_limit;
  o.deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(params.time_limit));
  return o;
}

class SimplexEngine : public Engine {
 public:
  std::string id() const override { return "simplex"; }
  EngineCapabilities capabilities() const override {
    EngineCapabilities c;
    c.sos = c.indicators = c.semicontinuous = c.duals = true;
    return c;
  }
  Solution solve_native(const GroundModel& model, const SolverParams& params) const override;

 private:
  Solution solve_continuous(const GroundModel& model, const SolverParams& params, Clock::time_point start) const;
  Solution branch_and_bound(const GroundModel& model, const SolverParams& params, Clock::time_point start) const;
};

Solution SimplexEngine::solve_continuous(const GroundModel& model, const SolverParams& params,
                                         Clock::time_point start) const {
  const double flip = model.sense == Sense::kMinimize ? 1.0 : -1.0;
  detail::LpProblem lp;
  lp.cost = model.objective;
  for (double& c : lp.cost) c *= flip;
  lp.lower = model.lower;
  lp.upper = model.upper;
  lp.rows = model.rows;
  detail::LpResult r = detail::solve_lp(lp, lp_options(params, start));
  Solution s;
  s.status = r.status;
  s.message = r.message;
  s.stats.iterations = r.iterations;
  if (r.status == SolveStatus::kOptimal) {
    s.primal = r.x;
    s.objective = flip * r.objective + model.objective_offset;
    std::vector<double> y = r.duals, d = r.reduced_costs;
    for (double& v : y) v *= flip;
    for (double& v : d) v *= flip;
    s.duals = std::move(y);
    s.reduced_costs = std::move(d);
  }
  return s;
}

struct Node {
  std::vector<double> lower;
  std::vector<double> upper;
  double bound = -kInfinity;  // parent relaxation value (min form)
  int depth = 0;
  long order = 0;
};

struct NodeWorse {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.order > b.order;
  }
};

Solution SimplexEngine::branch_and_bound(const GroundModel& model, const SolverParams& params,
                                         Clock::time_point start) const {
  const double flip = model.sense == Sense::kMinimize ? 1.0 : -1.0;
  const double feas = params.tolerances.feasibility;
  const double int_tol = params.tolerances.integrality;
  const int n = model.num_cols();
  detail::LpOptions lp_opts = lp_options(params, start);

  std::priority_queue<Node, std::vector<Node>, NodeWorse> open;
  long order = 0;
  open.push(Node{model.lower, model.upper, -kInfinity, 0, order++});

  std::optional<std::vector<double>> incumbent;
  double incumbent_value = kInfinity;  // min form
  Solution out;
  long nodes = 0;
  long iterations = 0;
  bool hit_limit = false;
  bool root = true;
  std::string limit_message;

  auto push_child = [&](const Node& parent, double relaxation, auto&& mutate) {
    Node child{parent.lower, parent.upper, relaxation, parent.depth + 1, order++};
    mutate(child);
    for (int j = 0; j < n; ++j) {
      if (child.lower[j] > child.upper[j] + feas) return;
    }
    open.push(std::move(child));
  };

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (incumbent) {
      double gap_abs = params.mip_gap * std::max(1.0, std::fabs(incumbent_value));
      if (node.bound >= incumbent_value - std::max(gap_abs, 1e-9)) continue;
    }
    if (nodes >= params.node_limit) {
      hit_limit = true;
      limit_message = "node limit reached";
      open.push(node);
      break;
    }
    if (Clock::now() > lp_opts.deadline) {
      hit_limit = true;
      limit_message = "time limit reached";
      open.push(node);
      break;
    }
    ++nodes;

    detail::LpProblem lp;
    lp.cost = model.objective;
    for (double& c : lp.cost) c *= flip;
    lp.lower = node.lower;
    lp.upper = node.upper;
    lp.rows = model.rows;
    for (const IndicatorRow& ind : model.indicators) {
      double tv = ind.trigger_value;
      if (node.lower[ind.trigger] == tv && node.upper[ind.trigger] == tv) {
        lp.rows.push_back(Row{ind.name, ind.cols, ind.vals, ind.sense, ind.rhs});
      }
    }
    detail::LpResult r = detail::solve_lp(lp, lp_opts);
    iterations += r.iterations;
    if (r.status == SolveStatus::kUnbounded) {
      if (root) {
        out.status = SolveStatus::kUnbounded;
        out.message = "LP relaxation unbounded";
        out.stats.nodes = nodes;
        out.stats.iterations = iterations;
        return out;
      }
      continue;
    }
    root = false;
    if (r.status == SolveStatus::kTimeLimit) {
      hit_limit = true;
      limit_message = r.message;
      break;
    }
    if (r.status != SolveStatus::kOptimal) continue;
    if (incumbent && r.objective >= incumbent_value - 1e-9 * std::max(1.0, std::fabs(incumbent_value))) continue;
    const std::vector<double>& x = r.x;

    // 1. integrality
    int branch_col = -1;
    double worst = int_tol;
    for (int j = 0; j < n; ++j) {
      if (!model.integer[j]) continue;
      double frac = std::fabs(x[j] - std::round(x[j]));
      if (frac > worst) {
        worst = frac;
        branch_col = j;
      }
    }
    if (branch_col >= 0) {
      double v = x[branch_col];
      push_child(node, r.objective, [&](Node& c) { c.upper[branch_col] = std::floor(v); });
      push_child(node, r.objective, [&](Node& c) { c.lower[branch_col] = std::ceil(v); });
      continue;
    }

    // 2. special ordered sets
    bool branched = false;
    for (const SosSet& s : model.sos) {
      std::vector<int> idx(s.cols.size());
      for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<int>(k);
      std::sort(idx.begin(), idx.end(), [&](int a, int b) { return s.weights[a] < s.weights[b]; });
      std::vector<int> nz;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (std::fabs(x[s.cols[idx[k]]]) > feas) nz.push_back(static_cast<int>(k));
      }
      bool violated = s.type == 1 ? nz.size() > 1 : (nz.size() > 2 || (nz.size() == 2 && nz[1] - nz[0] > 1));
      if (!violated) continue;
      // Split position r: left keeps [0, r], right keeps [r + 1, end) for
      // SOS1; SOS2 sides overlap in member r.
      int r_split = s.type == 1 ? nz.front() : nz.front() + 1;
      auto zero_range = [&](Node& c, int from, int to) {
        for (int k = from; k < to; ++k) {
          int col = s.cols[idx[k]];
          c.lower[col] = std::max(c.lower[col], 0.0);
          c.upper[col] = std::min(c.upper[col], 0.0);
          if (c.lower[col] > 0.0 || c.upper[col] < 0.0) c.lower[col] = 1.0, c.upper[col] = 0.0;
        }
      };
      const int size = static_cast<int>(idx.size());
      if (s.type == 1) {
        push_child(node, r.objective, [&](Node& c) { zero_range(c, r_split + 1, size); });
        push_child(node, r.objective, [&](Node& c) { zero_range(c, 0, r_split + 1); });
      } else {
        push_child(node, r.objective, [&](Node& c) { zero_range(c, r_split + 1, size); });
        push_child(node, r.objective, [&](Node& c) { zero_range(c, 0, r_split); });
      }
      branched = true;
      break;
    }
    if (branched) continue;

    // 3. indicators whose trigger is on but whose row is not yet enforced
    for (const IndicatorRow& ind : model.indicators) {
      double tv = ind.trigger_value;
      if (std::round(x[ind.trigger]) != tv) continue;
      if (node.lower[ind.trigger] == tv && node.upper[ind.trigger] == tv) continue;
      double act = 0.0;
      for (std::size_t k = 0; k < ind.cols.size(); ++k) act += ind.vals[k] * x[ind.cols[k]];
      double tol = feas * std::max(1.0, std::fabs(ind.rhs));
      bool ok = ind.sense == Relation::kLessEqual      ? act <= ind.rhs + tol
                : ind.sense == Relation::kGreaterEqual ? act >= ind.rhs - tol
                                                       : std::fabs(act - ind.rhs) <= tol;
      if (ok) continue;
      int t = ind.trigger;
      push_child(node, r.objective, [&](Node& c) { c.lower[t] = c.upper[t] = 1.0 - tv; });
      push_child(node, r.objective, [&](Node& c) { c.lower[t] = c.upper[t] = tv; });
      branched = true;
      break;
    }
    if (branched) continue;

    // 4. semi-continuous columns strictly inside (0, lower)
    for (const SemiContinuous& sc : model.semicontinuous) {
      double v = x[sc.col];
      if (v <= feas || v >= sc.lower - feas * std::max(1.0, sc.lower)) continue;
      push_child(node, r.objective, [&](Node& c) { c.upper[sc.col] = 0.0; });
      push_child(node, r.objective, [&](Node& c) { c.lower[sc.col] = std::max(c.lower[sc.col], sc.lower); });
      branched = true;
      break;
    }
    if (branched) continue;

    // Integral within tolerance only: fix the rounded integers and re-solve
    // so a big-M row cannot hide behind the integrality tolerance.
    int tiny_col = -1;
    double tiny = 1e-12;
    for (int j = 0; j < n; ++j) {
      if (!model.integer[j]) continue;
      double frac = std::fabs(x[j] - std::round(x[j]));
      if (frac > tiny) tiny = frac, tiny_col = j;
    }
    if (tiny_col < 0) {
      incumbent = x;
      incumbent_value = r.objective;
      continue;
    }
    detail::LpProblem fixed = lp;
    for (int j = 0; j < n; ++j) {
      if (model.integer[j]) fixed.lower[j] = fixed.upper[j] = std::round(x[j]);
    }
    fixed.rows.resize(model.rows.size());
    for (const IndicatorRow& ind : model.indicators) {
      if (std::round(x[ind.trigger]) == ind.trigger_value) {
        fixed.rows.push_back(Row{ind.name, ind.cols, ind.vals, ind.sense, ind.rhs});
      }
    }
    for (const SosSet& set : model.sos) {
      for (int c : set.cols) {
        if (std::fabs(x[c]) <= feas) fixed.lower[c] = std::min(fixed.lower[c], 0.0), fixed.upper[c] = 0.0;
      }
    }
    for (const SemiContinuous& sc : model.semicontinuous) {
      if (x[sc.col] <= feas) fixed.upper[sc.col] = 0.0;
      else fixed.lower[sc.col] = std::max(fixed.lower[sc.col], sc.lower);
    }
    detail::LpResult pr = detail::solve_lp(fixed, lp_opts);
    iterations += pr.iterations;
    bool polished = pr.status == SolveStatus::kOptimal;
    if (polished && (!incumbent || pr.objective < incumbent_value)) {
      incumbent = pr.x;
      incumbent_value = pr.objective;
    }
    if (polished && pr.objective <= r.objective + 1e-9 * std::max(1.0, std::fabs(r.objective))) continue;
    // Rounding lost value: the subtree may hold better points, so split on
    // the near-integral column after all.
    double v = x[tiny_col];
    push_child(node, r.objective, [&](Node& c) { c.upper[tiny_col] = std::floor(v); });
    push_child(node, r.objective, [&](Node& c) { c.lower[tiny_col] = std::ceil(v); });
  }

  out.stats.nodes = nodes;
  out.stats.iterations = iterations;
  double best_bound = incumbent ? incumbent_value : kInfinity;
  if (hit_limit) {
    std::priority_queue<Node, std::vector<Node>, NodeWorse> rest = open;
    while (!rest.empty()) {
      best_bound = std::min(best_bound, rest.top().bound);
      rest.pop();
    }
  }
  if (incumbent) {
    out.stats.best_bound = flip * best_bound + model.objective_offset;
    double gap = std::fabs(incumbent_value - best_bound) / std::max(1e-10, std::fabs(incumbent_value));
    out.stats.gap = std::isfinite(gap) ? gap : 1.0;
  }
  if (!incumbent) {
    out.status = hit_limit ? SolveStatus::kTimeLimit : SolveStatus::kInfeasible;
    out.message = hit_limit ? limit_message : "no integer feasible point";
    return out;
  }
  std::vector<double> x = *incumbent;
  for (int j = 0; j < n; ++j) {
    if (model.integer[j]) x[j] = std::round(x[j]);
  }
  out.primal = x;
  if (hit_limit) {
    out.status = SolveStatus::kTimeLimit;
    out.message = limit_message + "; incumbent " + format_number(objective_value(model, x));
    return out;
  }
  out.status = SolveStatus::kOptimal;
  out.objective = objective_value(model, x);
  return out;
}

Solution SimplexEngine::solve_native(const GroundModel& model, const SolverParams& params) const {
  auto start = Clock::now();
  Solution s = model.is_continuous() ? solve_continuous(model, params, start) : branch_and_bound(model, params, start);
  s.stats.wall_seconds = seconds_since(start);
  return s;
}

}  // namespace

std::unique_ptr<Engine> make_simplex_engine() { return std::make_unique<SimplexEngine>(); }

std::unique_ptr<Engine> make_engine(const std::string& id) {
  if (id == "simplex") return make_simplex_engine();
  if (id == "highs") {
    const char* cmd = std::getenv("NLMILP_HIGHS_COMMAND");
    return make_subprocess_engine("highs", cmd ? cmd : std::string("python3 ") + NLMILP_TOOLS_DIR + "/highs_solve.py");
  }
  throw Error(ErrorCode::kEngineUnavailable, "unknown engine '" + id + "'");
}

Solution solve(const GroundModel& model, const SolverParams& params, const Engine& engine) {
  auto start = Clock::now();
  model.check();
  EngineCapabilities caps = engine.capabilities();
  if (!caps.integer && !model.is_continuous()) {
    throw Error(ErrorCode::kEngineUnavailable, "engine '" + engine.id() + "' cannot solve integer models");
  }
  LoweringOptions lowering;
  lowering.piecewise = true;
  lowering.indicators = !caps.indicators;
  lowering.sos = !caps.sos;
  lowering.semicontinuous = !caps.semicontinuous;
  std::vector<LoweringRecord> records;
  const bool lower = model.has_annotations();
  GroundModel lowered = lower ? lower_annotations(model, lowering, &records) : GroundModel{};
  const GroundModel& target = lower ? lowered : model;
  Solution s = engine.solve_native(target, params);
  s.engine = engine.id();
  s.lowering = std::move(records);
  if (!s.primal.empty()) s.primal.resize(model.num_cols());
  s.names = model.col_names;
  if (!model.is_continuous()) {
    s.duals.reset();
    s.reduced_costs.reset();
  }
  if (s.status != SolveStatus::kOptimal) {
    s.objective.reset();
  } else if (lower) {
    s.objective = objective_value(model, s.primal);
  }
  s.stats.wall_seconds = seconds_since(start);
  return s;
}

Solution solve(const GroundModel& model, const SolverParams& params) {
  return solve(model, params, *make_simplex_engine());
}

}  // namespace nlmilp
