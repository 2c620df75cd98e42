#include "nlmilp/sifting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "nlmilp/error.hpp"

namespace nlmilp::sift {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<int> random_subset(int n, int k, std::uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::clamp(k, 0, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> initial_set(int n, int auto_k, const SiftConfig& config) {
  if (!config.initial.empty()) {
    std::set<int> s;
    for (int j : config.initial) {
      if (j < 0 || j >= n) throw Error(ErrorCode::kInvalidArgument, "initial index " + std::to_string(j) + " out of range");
      s.insert(j);
    }
    return {s.begin(), s.end()};
  }
  return random_subset(n, config.init_k.value_or(auto_k), config.seed);
}

void require_duals(const Engine& engine) {
  if (!engine.capabilities().duals) {
    throw Error(ErrorCode::kEngineUnavailable, "engine '" + engine.id() + "' reports no duals; sifting needs them");
  }
}

void merge_sorted(std::vector<int>& active, const std::vector<int>& add) {
  active.insert(active.end(), add.begin(), add.end());
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
}

GroundModel restricted_columns(const StandardForm& form, const std::vector<int>& active) {
  GroundModel g;
  g.name = "restricted";
  g.objective_offset = form.offset;
  g.rows.resize(form.rows);
  for (int i = 0; i < form.rows; ++i) {
    g.rows[i].name = "r" + std::to_string(i);
    g.rows[i].sense = Relation::kEqual;
    g.rows[i].rhs = form.b[i];
  }
  for (int k = 0; k < static_cast<int>(active.size()); ++k) {
    int j = active[k];
    g.add_column(form.names.empty() ? "x" + std::to_string(j) : form.names[j], form.c[j], 0.0, form.upper_of(j), false);
    for (const auto& [i, a] : form.columns[j]) {
      g.rows[i].cols.push_back(k);
      g.rows[i].vals.push_back(a);
    }
  }
  return g;
}

// One column per row, big |b_i| first, chosen to move row i toward b_i.
std::vector<int> identity_heuristic(const StandardForm& form, const std::vector<int>& active) {
  std::vector<char> in(form.num_cols(), 0);
  for (int j : active) in[j] = 1;
  std::vector<std::vector<std::pair<int, double>>> by_row(form.rows);
  for (int j = 0; j < form.num_cols(); ++j) {
    for (const auto& [i, a] : form.columns[j]) by_row[i].emplace_back(j, a);
  }
  std::vector<int> order(form.rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::fabs(form.b[a]) > std::fabs(form.b[b]); });
  std::vector<int> added;
  for (int i : order) {
    double sgn = form.b[i] >= 0 ? 1.0 : -1.0;
    int best = -1;
    double best_v = 0.0;
    for (const auto& [j, a] : by_row[i]) {
      if (in[j]) continue;
      double v = a * sgn;
      if (v > best_v) {
        best_v = v;
        best = j;
      }
    }
    if (best >= 0) {
      in[best] = 1;
      added.push_back(best);
    }
  }
  std::sort(added.begin(), added.end());
  return added;
}

}  // namespace

void StandardForm::check() const {
  if (rows < 0 || static_cast<int>(b.size()) != rows) throw Error(ErrorCode::kInvalidShape, "b must have one entry per row");
  if (columns.size() != c.size()) throw Error(ErrorCode::kInvalidShape, "one column per cost entry");
  if (!upper.empty() && upper.size() != c.size()) throw Error(ErrorCode::kInvalidShape, "upper must match columns");
  if (!names.empty() && names.size() != c.size()) throw Error(ErrorCode::kInvalidShape, "names must match columns");
  for (const auto& col : columns) {
    for (const auto& [i, a] : col) {
      if (i < 0 || i >= rows) throw Error(ErrorCode::kInvalidShape, "row index out of range");
      (void)a;
    }
  }
  for (double u : upper) {
    if (!(u >= 0)) throw Error(ErrorCode::kInvalidShape, "upper bounds must be >= 0");
  }
}

std::vector<double> StandardFormConversion::to_source(const std::vector<double>& x) const {
  std::vector<double> out(source_cols, 0.0);
  for (std::size_t k = 0; k < map.size() && k < x.size(); ++k) {
    if (map[k].source < 0) continue;
    out[map[k].source] += map[k].shift + map[k].sign * x[k];
  }
  return out;
}

StandardFormConversion to_standard_form(const GroundModel& source) {
  GroundModel model = relax(source);
  StandardFormConversion conv;
  conv.source_cols = model.num_cols();
  conv.sense_sign = model.sense == Sense::kMinimize ? 1.0 : -1.0;
  StandardForm& f = conv.form;
  f.rows = model.num_rows();
  f.b.resize(f.rows);
  for (int i = 0; i < f.rows; ++i) f.b[i] = model.rows[i].rhs;
  std::vector<std::vector<std::pair<int, double>>> by_col(model.num_cols());
  for (int i = 0; i < f.rows; ++i) {
    const Row& r = model.rows[i];
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      if (r.vals[k] != 0.0) by_col[r.cols[k]].emplace_back(i, r.vals[k]);
    }
  }
  double offset = model.objective_offset;
  auto push = [&](const std::string& name, double cost, std::vector<std::pair<int, double>> col, double ub,
                  ColumnMap m) {
    f.c.push_back(conv.sense_sign * cost);
    f.columns.push_back(std::move(col));
    f.upper.push_back(ub);
    f.names.push_back(name);
    conv.map.push_back(m);
  };
  for (int j = 0; j < model.num_cols(); ++j) {
    double lb = model.lower[j], ub = model.upper[j], cj = model.objective[j];
    const std::string& name = model.col_names[j];
    auto col = by_col[j];
    if (std::isfinite(lb)) {
      for (const auto& [i, a] : col) f.b[i] -= a * lb;
      offset += cj * lb;
      push(name, cj, col, std::isfinite(ub) ? ub - lb : kInfinity, {j, 1.0, lb});
    } else if (std::isfinite(ub)) {
      for (auto& [i, a] : col) {
        f.b[i] -= a * ub;
        a = -a;
      }
      offset += cj * ub;
      push(name + "#neg", -cj, col, kInfinity, {j, -1.0, ub});
    } else {
      push(name + "#pos", cj, col, kInfinity, {j, 1.0, 0.0});
      for (auto& [i, a] : col) a = -a;
      push(name + "#neg", -cj, col, kInfinity, {j, -1.0, 0.0});
    }
  }
  for (int i = 0; i < f.rows; ++i) {
    Relation rel = model.rows[i].sense;
    if (rel == Relation::kEqual) continue;
    double s = rel == Relation::kLessEqual ? 1.0 : -1.0;
    push("slack#" + (model.rows[i].name.empty() ? std::to_string(i) : model.rows[i].name), 0.0, {{i, s}}, kInfinity,
         {-1, 1.0, 0.0});
  }
  f.offset = conv.sense_sign * offset;
  return conv;
}

GroundModel to_ground(const StandardForm& form) {
  std::vector<int> all(form.num_cols());
  std::iota(all.begin(), all.end(), 0);
  GroundModel g = restricted_columns(form, all);
  g.name = "standard";
  return g;
}

void check_config(const SiftConfig& config) {
  if (config.init_k && *config.init_k < 1) throw Error(ErrorCode::kInvalidArgument, "init_k must be >= 1");
  if (!(config.epsilon > 0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be > 0");
  if (config.max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  if (config.batch_cap < 0) throw Error(ErrorCode::kInvalidArgument, "batch_cap must be >= 0");
  if (config.gap_stop && !(*config.gap_stop >= 0)) throw Error(ErrorCode::kInvalidArgument, "gap_stop must be >= 0");
}

std::string history_csv(const std::vector<IterationRecord>& history) {
  std::ostringstream out;
  out << "iteration,active,objective,added,seconds,note\n";
  for (const auto& h : history) {
    out << h.iteration << ',' << h.active << ',' << format_number(h.objective) << ',' << h.added << ','
        << format_number(h.seconds) << ',' << h.note << '\n';
  }
  return out.str();
}

std::vector<double> reduced_costs(const StandardForm& form, const std::vector<double>& y) {
  std::vector<double> d(form.num_cols());
  for (int j = 0; j < form.num_cols(); ++j) {
    double v = form.c[j];
    for (const auto& [i, a] : form.columns[j]) v -= a * y[i];
    d[j] = v;
  }
  return d;
}

std::vector<int> price_columns(const StandardForm& form, const std::vector<int>& active, const std::vector<double>& y,
                               double epsilon) {
  if (static_cast<int>(y.size()) != form.rows) {
    throw Error(ErrorCode::kMissingDuals, "pricing needs one dual per row");
  }
  std::vector<char> in(form.num_cols(), 0);
  for (int j : active) in[j] = 1;
  std::vector<double> d = reduced_costs(form, y);
  std::vector<int> out;
  for (int j = 0; j < form.num_cols(); ++j) {
    if (!in[j] && d[j] < -epsilon) out.push_back(j);
  }
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) { return d[a] < d[b]; });
  return out;
}

SiftResult sift_columns(const StandardForm& form, const SiftConfig& config, const Engine& engine) {
  form.check();
  check_config(config);
  require_duals(engine);
  const auto t0 = Clock::now();
  const int n = form.num_cols();
  SiftResult res;
  res.active = initial_set(n, std::min(n, std::max(1, 2 * form.rows)), config);
  bool augmented = false;

  for (int iter = 1;; ++iter) {
    if (iter > config.max_iterations) {
      throw Error(ErrorCode::kIterationLimit, "column sifting hit " + std::to_string(config.max_iterations) + " iterations");
    }
    GroundModel restricted = restricted_columns(form, res.active);
    Solution sol = solve(restricted, config.solver, engine);
    IterationRecord rec{iter, static_cast<int>(res.active.size()), 0.0, 0, 0.0, ""};

    if (sol.status == SolveStatus::kInfeasible) {
      if (!augmented) {
        augmented = true;
        auto extra = identity_heuristic(form, res.active);
        rec.added = static_cast<int>(extra.size());
        rec.note = "restricted infeasible; identity augment";
        rec.objective = kInfinity;
        rec.seconds = since(t0);
        res.history.push_back(rec);
        merge_sorted(res.active, extra);
        continue;
      }
      if (!config.phase1_fallback) {
        throw Error(ErrorCode::kRestrictedInfeasible,
                    "restricted problem over " + std::to_string(res.active.size()) + " columns is infeasible");
      }
      // Phase 1: artificial columns make every restriction feasible; sift on
      // their total and keep the real columns it ends up using.
      StandardForm p1;
      p1.rows = form.rows;
      p1.b = form.b;
      p1.c.assign(n, 0.0);
      p1.columns = form.columns;
      p1.upper = form.upper;
      for (int i = 0; i < form.rows; ++i) {
        p1.c.push_back(1.0);
        p1.columns.push_back({{i, form.b[i] >= 0 ? 1.0 : -1.0}});
        if (!p1.upper.empty()) p1.upper.push_back(kInfinity);
      }
      SiftConfig c1 = config;
      c1.phase1_fallback = false;
      c1.gap_stop.reset();
      c1.initial = res.active;
      for (int i = 0; i < form.rows; ++i) c1.initial.push_back(n + i);
      SiftResult r1 = sift_columns(p1, c1, engine);
      rec.note = "phase 1: " + std::to_string(r1.history.size()) + " iterations";
      rec.objective = kInfinity;
      rec.seconds = since(t0);
      double infeas = r1.solution.objective.value_or(kInfinity);
      if (!(infeas <= config.solver.tolerances.feasibility * std::max(1.0, static_cast<double>(form.rows)))) {
        res.history.push_back(rec);
        res.solution.status = SolveStatus::kInfeasible;
        res.solution.message = "phase 1 optimum " + format_number(infeas) + " > 0; the full problem is infeasible";
        res.stop = "infeasible";
        return res;
      }
      std::vector<int> real;
      for (int j : r1.active) {
        if (j < n) real.push_back(j);
      }
      rec.added = static_cast<int>(real.size()) - static_cast<int>(res.active.size());
      res.history.push_back(rec);
      res.active = real;
      continue;
    }
    if (sol.status == SolveStatus::kUnbounded) {
      res.solution.status = SolveStatus::kUnbounded;
      res.solution.message = "restricted problem unbounded, so the full problem is";
      res.stop = "unbounded";
      rec.objective = -kInfinity;
      rec.seconds = since(t0);
      res.history.push_back(rec);
      return res;
    }
    if (sol.status != SolveStatus::kOptimal) {
      res.solution = sol;
      res.stop = std::string(to_string(sol.status));
      rec.seconds = since(t0);
      res.history.push_back(rec);
      return res;
    }
    if (!sol.duals) throw Error(ErrorCode::kMissingDuals, "restricted solve returned no duals");
    const std::vector<double>& y = *sol.duals;
    std::vector<int> priced = price_columns(form, res.active, y, config.epsilon);
    rec.objective = *sol.objective;
    rec.added = static_cast<int>(priced.size());

    std::vector<double> d = reduced_costs(form, y);
    // Lagrangian bound: the restriction plus every improving column at its upper bound.
    double bound = *sol.objective;
    for (int j : priced) bound += d[j] * form.upper_of(j);
    std::optional<double> lower;
    if (std::isfinite(bound)) lower = bound;
    if (lower) res.gap = (*sol.objective - *lower) / std::max(1.0, std::fabs(*sol.objective));

    bool done = priced.empty();
    bool gap_hit = !done && config.gap_stop && res.gap && *res.gap <= *config.gap_stop;
    if (done || gap_hit) {
      res.stop = done ? "priced-out" : "gap";
      rec.added = 0;
      rec.seconds = since(t0);
      res.history.push_back(rec);
      Solution& out = res.solution;
      out.status = SolveStatus::kOptimal;
      out.primal.assign(n, 0.0);
      for (std::size_t k = 0; k < res.active.size(); ++k) out.primal[res.active[k]] = sol.primal[k];
      double obj = form.offset;
      for (int j = 0; j < n; ++j) obj += form.c[j] * out.primal[j];
      out.objective = obj;
      out.duals = y;
      out.reduced_costs = d;
      out.names = form.names.empty() ? std::vector<std::string>{} : form.names;
      if (out.names.empty()) {
        for (int j = 0; j < n; ++j) out.names.push_back("x" + std::to_string(j));
      }
      out.engine = engine.id();
      out.stats.iterations = static_cast<long>(res.history.size());
      out.stats.wall_seconds = since(t0);
      if (lower) out.stats.best_bound = *lower;
      out.stats.gap = res.gap;
      return res;
    }
    if (config.batch_cap > 0 && static_cast<int>(priced.size()) > config.batch_cap) priced.resize(config.batch_cap);
    rec.seconds = since(t0);
    res.history.push_back(rec);
    merge_sorted(res.active, priced);
  }
}

SiftResult sift_columns(const StandardForm& form, const SiftConfig& config) {
  auto engine = make_simplex_engine();
  return sift_columns(form, config, *engine);
}

namespace {

double violation(const Row& r, const std::vector<double>& x) {
  double act = row_activity(r, x);
  switch (r.sense) {
    case Relation::kLessEqual: return act - r.rhs;
    case Relation::kGreaterEqual: return r.rhs - act;
    case Relation::kEqual: return std::fabs(act - r.rhs);
  }
  return 0.0;
}

}  // namespace

SiftResult sift_constraints(const GroundModel& source, const SiftConfig& config, const Engine& engine) {
  check_config(config);
  require_duals(engine);
  const auto t0 = Clock::now();
  GroundModel model = relax(source);
  model.check();
  const int m = model.num_rows();
  const double flip = model.sense == Sense::kMinimize ? 1.0 : -1.0;
  const double tol = config.solver.tolerances.feasibility;
  SiftResult res;
  const int auto_k = std::min(m, std::max(10, m / 10));
  res.active = initial_set(m, auto_k, config);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  for (int iter = 1;; ++iter) {
    if (iter > config.max_iterations) {
      throw Error(ErrorCode::kIterationLimit, "row sifting hit " + std::to_string(config.max_iterations) + " iterations");
    }
    GroundModel restricted = model;
    restricted.rows.clear();
    for (int i : res.active) restricted.rows.push_back(model.rows[i]);
    Solution sol = solve(restricted, config.solver, engine);
    IterationRecord rec{iter, static_cast<int>(res.active.size()), 0.0, 0, 0.0, ""};

    std::vector<char> in(m, 0);
    for (int i : res.active) in[i] = 1;
    std::vector<int> outside;
    for (int i = 0; i < m; ++i) {
      if (!in[i]) outside.push_back(i);
    }

    if (sol.status == SolveStatus::kUnbounded && !outside.empty()) {
      // No ray to price against; bring in more rows at random.
      std::shuffle(outside.begin(), outside.end(), rng);
      int take = std::min<int>(outside.size(), std::max(1, config.batch_cap > 0 ? config.batch_cap : auto_k));
      outside.resize(take);
      std::sort(outside.begin(), outside.end());
      rec.objective = -flip * kInfinity;
      rec.added = take;
      rec.note = "restricted unbounded; random rows added";
      rec.seconds = since(t0);
      res.history.push_back(rec);
      merge_sorted(res.active, outside);
      continue;
    }
    if (sol.status != SolveStatus::kOptimal) {
      res.solution = sol;
      res.solution.primal.clear();
      res.solution.duals.reset();
      res.solution.reduced_costs.reset();
      res.stop = sol.status == SolveStatus::kInfeasible ? "infeasible" : sol.status == SolveStatus::kUnbounded
                                                                             ? "unbounded"
                                                                             : std::string(to_string(sol.status));
      if (sol.status == SolveStatus::kInfeasible) res.solution.message = "a subset of the rows is already infeasible";
      rec.seconds = since(t0);
      res.history.push_back(rec);
      return res;
    }
    std::vector<std::pair<double, int>> violated;
    for (int i : outside) {
      double v = violation(model.rows[i], sol.primal);
      if (v > tol) violated.emplace_back(-v, i);
    }
    std::sort(violated.begin(), violated.end());
    rec.objective = *sol.objective;
    rec.added = static_cast<int>(violated.size());
    if (config.incumbent) {
      res.gap = flip * (*config.incumbent - *sol.objective) / std::max(1.0, std::fabs(*config.incumbent));
    }
    bool done = violated.empty();
    bool gap_hit = !done && config.gap_stop && res.gap && *res.gap <= *config.gap_stop;
    if (done || gap_hit) {
      res.stop = done ? "no-violation" : "gap";
      rec.added = 0;
      rec.seconds = since(t0);
      res.history.push_back(rec);
      Solution& out = res.solution;
      out = sol;
      out.objective = objective_value(model, sol.primal);
      std::vector<double> y(m, 0.0);
      for (std::size_t k = 0; k < res.active.size(); ++k) y[res.active[k]] = (*sol.duals)[k];
      out.duals = y;
      out.stats.iterations = static_cast<long>(res.history.size());
      out.stats.wall_seconds = since(t0);
      out.stats.best_bound = *sol.objective;
      out.stats.gap = done ? std::optional<double>(0.0) : res.gap;
      return res;
    }
    if (config.batch_cap > 0 && static_cast<int>(violated.size()) > config.batch_cap) violated.resize(config.batch_cap);
    std::vector<int> add;
    for (const auto& [v, i] : violated) add.push_back(i);
    rec.seconds = since(t0);
    res.history.push_back(rec);
    merge_sorted(res.active, add);
  }
}

SiftResult sift_constraints(const GroundModel& model, const SiftConfig& config) {
  auto engine = make_simplex_engine();
  return sift_constraints(model, config, *engine);
}

}  // namespace nlmilp::sift
