#include "nlmilp/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "nlmilp/error.hpp"

namespace nlmilp {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view to_string(Relation rel) {
  switch (rel) {
    case Relation::kLessEqual: return "<=";
    case Relation::kEqual: return "=";
    case Relation::kGreaterEqual: return ">=";
  }
  return "<=";
}

std::string_view to_string(Sense sense) { return sense == Sense::kMinimize ? "minimize" : "maximize"; }

bool GroundModel::is_continuous() const {
  return std::none_of(integer.begin(), integer.end(), [](bool b) { return b; }) && !has_annotations();
}

int GroundModel::add_column(std::string name, double cost, double lb, double ub, bool is_integer) {
  col_names.push_back(std::move(name));
  objective.push_back(cost);
  lower.push_back(lb);
  upper.push_back(ub);
  integer.push_back(is_integer);
  return num_cols() - 1;
}

int GroundModel::find_column(const std::string& name) const {
  auto it = std::find(col_names.begin(), col_names.end(), name);
  return it == col_names.end() ? -1 : static_cast<int>(it - col_names.begin());
}

void GroundModel::check() const {
  const std::size_t n = objective.size();
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, "ground model: " + what); };
  if (col_names.size() != n || lower.size() != n || upper.size() != n || integer.size() != n) {
    fail("column tables have inconsistent lengths");
  }
  std::set<std::string> names(col_names.begin(), col_names.end());
  if (names.size() != n) fail("duplicate column names");
  std::set<std::string> row_names;
  for (const Row& r : rows) {
    if (!row_names.insert(r.name).second) fail("duplicate row name '" + r.name + "'");
    if (r.cols.size() != r.vals.size()) fail("row '" + r.name + "' has mismatched entries");
    std::set<int> seen;
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      if (r.cols[k] < 0 || r.cols[k] >= static_cast<int>(n)) fail("row '" + r.name + "' references bad column");
      if (!seen.insert(r.cols[k]).second) fail("row '" + r.name + "' repeats a column");
      if (!std::isfinite(r.vals[k])) fail("row '" + r.name + "' has a non-finite coefficient");
    }
    if (!std::isfinite(r.rhs)) fail("row '" + r.name + "' has a non-finite rhs");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(objective[j])) fail("non-finite objective coefficient");
    if (lower[j] > upper[j]) fail("column '" + col_names[j] + "' has lower > upper");
  }
  auto check_col = [&](int c, const std::string& where) {
    if (c < 0 || c >= static_cast<int>(n)) fail(where + " references bad column");
  };
  for (const SosSet& s : sos) {
    if (s.type != 1 && s.type != 2) fail("SOS '" + s.name + "' has type " + std::to_string(s.type));
    if (s.cols.size() < 2) fail("SOS '" + s.name + "' needs at least 2 members");
    if (s.weights.size() != s.cols.size()) fail("SOS '" + s.name + "' weight count mismatch");
    for (int c : s.cols) check_col(c, "SOS '" + s.name + "'");
    for (std::size_t k = 1; k < s.weights.size(); ++k) {
      if (!(s.weights[k] > s.weights[k - 1])) fail("SOS '" + s.name + "' weights not increasing");
    }
  }
  for (const IndicatorRow& ind : indicators) {
    check_col(ind.trigger, "indicator '" + ind.name + "'");
    if (!integer[ind.trigger] || lower[ind.trigger] < 0 || upper[ind.trigger] > 1) {
      fail("indicator '" + ind.name + "' trigger is not binary");
    }
    if (ind.trigger_value != 0 && ind.trigger_value != 1) fail("indicator '" + ind.name + "' trigger value");
    if (ind.cols.size() != ind.vals.size()) fail("indicator '" + ind.name + "' mismatched entries");
    for (int c : ind.cols) check_col(c, "indicator '" + ind.name + "'");
  }
  for (const SemiContinuous& sc : semicontinuous) {
    check_col(sc.col, "semi-continuous");
    if (!(sc.lower > 0 && sc.lower <= sc.upper)) fail("semi-continuous bounds need 0 < lower <= upper");
    if (lower[sc.col] != 0.0 || upper[sc.col] != sc.upper) {
      fail("semi-continuous column '" + col_names[sc.col] + "' must have bounds [0, upper]");
    }
  }
  for (const PiecewiseLinear& p : piecewise) {
    check_col(p.x, "piecewise '" + p.name + "'");
    check_col(p.y, "piecewise '" + p.name + "'");
    if (p.points.size() < 2) fail("piecewise '" + p.name + "' needs at least 2 breakpoints");
    for (std::size_t k = 1; k < p.points.size(); ++k) {
      if (!(p.points[k].first > p.points[k - 1].first)) fail("piecewise '" + p.name + "' breakpoints not increasing");
    }
  }
}

double objective_value(const GroundModel& model, const std::vector<double>& x) {
  double v = model.objective_offset;
  for (int j = 0; j < model.num_cols(); ++j) v += model.objective[j] * x[j];
  return v;
}

double row_activity(const Row& row, const std::vector<double>& x) {
  double a = 0.0;
  for (std::size_t k = 0; k < row.cols.size(); ++k) a += row.vals[k] * x[row.cols[k]];
  return a;
}

namespace {

double relation_violation(double activity, Relation sense, double rhs) {
  switch (sense) {
    case Relation::kLessEqual: return std::max(0.0, activity - rhs);
    case Relation::kGreaterEqual: return std::max(0.0, rhs - activity);
    case Relation::kEqual: return std::abs(activity - rhs);
  }
  return 0.0;
}

}  // namespace

FeasibilityReport check_feasibility(const GroundModel& model, const std::vector<double>& x,
                                    double feasibility_tol, double integrality_tol) {
  FeasibilityReport report;
  if (static_cast<int>(x.size()) != model.num_cols()) {
    report.feasible = false;
    report.max_violation = kInfinity;
    report.worst = "dimension";
    return report;
  }
  auto note = [&](double violation, double scale, const std::string& what) {
    double scaled = violation / std::max(1.0, scale);
    if (scaled > report.max_violation) {
      report.max_violation = scaled;
      report.worst = what;
    }
    if (scaled > feasibility_tol) report.feasible = false;
  };
  for (int j = 0; j < model.num_cols(); ++j) {
    note(std::max(0.0, model.lower[j] - x[j]), std::abs(model.lower[j]), model.col_names[j]);
    note(std::max(0.0, x[j] - model.upper[j]), std::abs(model.upper[j]), model.col_names[j]);
    if (model.integer[j] && std::abs(x[j] - std::round(x[j])) > integrality_tol) {
      report.feasible = false;
      report.worst = model.col_names[j] + " (integrality)";
      report.max_violation = std::max(report.max_violation, std::abs(x[j] - std::round(x[j])));
    }
  }
  for (const Row& r : model.rows) {
    note(relation_violation(row_activity(r, x), r.sense, r.rhs), std::abs(r.rhs), r.name);
  }
  for (const IndicatorRow& ind : model.indicators) {
    if (std::abs(x[ind.trigger] - ind.trigger_value) <= integrality_tol) {
      Row r{ind.name, ind.cols, ind.vals, ind.sense, ind.rhs};
      note(relation_violation(row_activity(r, x), ind.sense, ind.rhs), std::abs(ind.rhs), ind.name);
    }
  }
  for (const SosSet& s : model.sos) {
    std::vector<int> nonzero;
    for (std::size_t k = 0; k < s.cols.size(); ++k) {
      if (std::abs(x[s.cols[k]]) > feasibility_tol) nonzero.push_back(static_cast<int>(k));
    }
    bool ok = s.type == 1 ? nonzero.size() <= 1
                          : nonzero.size() <= 1 || (nonzero.size() == 2 && nonzero[1] == nonzero[0] + 1);
    if (!ok) {
      report.feasible = false;
      report.worst = s.name;
    }
  }
  for (const SemiContinuous& sc : model.semicontinuous) {
    double v = x[sc.col];
    if (std::abs(v) > feasibility_tol) {
      note(std::max(0.0, sc.lower - v), sc.lower, model.col_names[sc.col] + " (semi-continuous)");
      note(std::max(0.0, v - sc.upper), sc.upper, model.col_names[sc.col] + " (semi-continuous)");
    }
  }
  for (const PiecewiseLinear& p : model.piecewise) {
    double xv = x[p.x];
    const auto& pts = p.points;
    if (xv < pts.front().first - feasibility_tol || xv > pts.back().first + feasibility_tol) {
      report.feasible = false;
      report.worst = p.name;
      continue;
    }
    double fx = pts.back().second;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      if (xv <= pts[k].first) {
        double t = (xv - pts[k - 1].first) / (pts[k].first - pts[k - 1].first);
        t = std::clamp(t, 0.0, 1.0);
        fx = pts[k - 1].second + t * (pts[k].second - pts[k - 1].second);
        break;
      }
    }
    note(std::abs(x[p.y] - fx), std::abs(fx), p.name);
  }
  return report;
}

namespace {

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

// Column bounds tightened by single-variable rows.
std::pair<std::vector<double>, std::vector<double>> implied_bounds(const GroundModel& m) {
  std::vector<double> lo = m.lower, hi = m.upper;
  for (const Row& r : m.rows) {
    int col = -1;
    double a = 0.0;
    int nz = 0;
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      if (r.vals[k] == 0.0) continue;
      ++nz;
      col = r.cols[k];
      a = r.vals[k];
    }
    if (nz != 1) continue;
    double v = r.rhs / a;
    bool upper = (r.sense == Relation::kLessEqual) == (a > 0);
    if (r.sense == Relation::kEqual || upper) hi[col] = std::min(hi[col], v);
    if (r.sense == Relation::kEqual || !upper) lo[col] = std::max(lo[col], v);
  }
  return {lo, hi};
}

// Smallest M that relaxes `sum vals * x  sense  rhs` over the box, capped by
// the given M. Infinite activity keeps the cap.
double tight_big_m(const IndicatorRow& ind, Relation sense, const std::vector<double>& lo,
                   const std::vector<double>& hi) {
  double extreme = 0.0;
  for (std::size_t k = 0; k < ind.cols.size(); ++k) {
    double v = ind.vals[k];
    int c = ind.cols[k];
    bool take_hi = (v > 0) == (sense == Relation::kLessEqual);
    extreme += v * (take_hi ? hi[c] : lo[c]);
  }
  if (!std::isfinite(extreme)) return ind.big_m;
  double need = sense == Relation::kLessEqual ? extreme - ind.rhs : ind.rhs - extreme;
  return std::min(ind.big_m, std::max(need, 0.0));
}

void lower_sos(GroundModel& out, const SosSet& s, std::vector<LoweringRecord>* records) {
  std::vector<int> order(s.cols.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return s.weights[a] < s.weights[b]; });
  const int n = static_cast<int>(order.size());
  auto [lo, hi] = implied_bounds(out);
  auto upper_of = [&](int col) { return finite_or(hi[col], kDefaultBigM); };
  auto lower_of = [&](int col) { return finite_or(lo[col], -kDefaultBigM); };
  // Links member `col` to the sum of the listed binaries.
  auto link = [&](int col, const std::vector<int>& binaries, const std::string& tag) {
    double u = upper_of(col);
    if (u > 0) {
      Row r{s.name + "_" + tag + "_up", {col}, {1.0}, Relation::kLessEqual, 0.0};
      for (int b : binaries) {
        r.cols.push_back(b);
        r.vals.push_back(-u);
      }
      out.add_row(std::move(r));
    }
    double l = lower_of(col);
    if (l < 0) {
      Row r{s.name + "_" + tag + "_lo", {col}, {1.0}, Relation::kGreaterEqual, 0.0};
      for (int b : binaries) {
        r.cols.push_back(b);
        r.vals.push_back(-l);
      }
      out.add_row(std::move(r));
    }
  };
  Row cardinality{s.name + "_card", {}, {}, Relation::kLessEqual, 1.0};
  if (s.type == 1) {
    for (int k = 0; k < n; ++k) {
      int d = out.add_column(s.name + "_d" + std::to_string(k), 0.0, 0.0, 1.0, true);
      link(s.cols[order[k]], {d}, std::to_string(k));
      cardinality.cols.push_back(d);
      cardinality.vals.push_back(1.0);
    }
  } else {
    std::vector<int> segment;
    for (int k = 0; k + 1 < n; ++k) {
      segment.push_back(out.add_column(s.name + "_d" + std::to_string(k), 0.0, 0.0, 1.0, true));
      cardinality.cols.push_back(segment.back());
      cardinality.vals.push_back(1.0);
    }
    for (int k = 0; k < n; ++k) {
      std::vector<int> adjacent;
      if (k > 0) adjacent.push_back(segment[k - 1]);
      if (k + 1 < n) adjacent.push_back(segment[k]);
      link(s.cols[order[k]], adjacent, std::to_string(k));
    }
  }
  out.add_row(std::move(cardinality));
  if (records) records->push_back({s.name, s.type == 1 ? "SOS1 -> binary linking" : "SOS2 -> segment binaries"});
}

}  // namespace

GroundModel lower_annotations(const GroundModel& model, const LoweringOptions& options,
                              std::vector<LoweringRecord>* records) {
  GroundModel out = model;
  if (options.piecewise) {
    out.piecewise.clear();
    for (const PiecewiseLinear& p : model.piecewise) {
      SosSet lambda_set{p.name + "_lambda", 2, {}, {}};
      Row xrow{p.name + "_x", {p.x}, {1.0}, Relation::kEqual, 0.0};
      Row yrow{p.name + "_y", {p.y}, {1.0}, Relation::kEqual, 0.0};
      Row convex{p.name + "_sum", {}, {}, Relation::kEqual, 1.0};
      for (std::size_t k = 0; k < p.points.size(); ++k) {
        int lam = out.add_column(p.name + "_l" + std::to_string(k), 0.0, 0.0, 1.0, false);
        xrow.cols.push_back(lam);
        xrow.vals.push_back(-p.points[k].first);
        yrow.cols.push_back(lam);
        yrow.vals.push_back(-p.points[k].second);
        convex.cols.push_back(lam);
        convex.vals.push_back(1.0);
        lambda_set.cols.push_back(lam);
        lambda_set.weights.push_back(static_cast<double>(k + 1));
      }
      out.add_row(std::move(xrow));
      out.add_row(std::move(yrow));
      out.add_row(std::move(convex));
      out.sos.push_back(std::move(lambda_set));
      if (records) records->push_back({p.name, "piecewise-linear -> lambda SOS2"});
    }
  }
  if (options.indicators) {
    out.indicators.clear();
    auto [lo, hi] = implied_bounds(out);
    for (const IndicatorRow& ind : model.indicators) {
      double m = 0.0;
      // The implied row is relaxed by M whenever the trigger is off.
      auto emit = [&](Relation rel, const std::string& suffix) {
        m = tight_big_m(ind, rel, lo, hi);
        Row r{ind.name + suffix, ind.cols, ind.vals, rel, ind.rhs};
        double sign = rel == Relation::kLessEqual ? 1.0 : -1.0;
        if (ind.trigger_value == 1) {
          r.cols.push_back(ind.trigger);
          r.vals.push_back(sign * m);
          r.rhs += sign * m;
        } else {
          r.cols.push_back(ind.trigger);
          r.vals.push_back(-sign * m);
        }
        out.add_row(std::move(r));
      };
      if (ind.sense == Relation::kLessEqual || ind.sense == Relation::kEqual) {
        emit(Relation::kLessEqual, ind.sense == Relation::kEqual ? "_bigM_up" : "_bigM");
      }
      if (ind.sense == Relation::kGreaterEqual || ind.sense == Relation::kEqual) {
        emit(Relation::kGreaterEqual, ind.sense == Relation::kEqual ? "_bigM_lo" : "_bigM");
      }
      if (records) records->push_back({ind.name, "indicator -> big-M (M=" + std::to_string(m) + ")"});
    }
  }
  if (options.semicontinuous) {
    out.semicontinuous.clear();
    for (const SemiContinuous& sc : model.semicontinuous) {
      const std::string base = out.col_names[sc.col];
      int d = out.add_column(base + "_on", 0.0, 0.0, 1.0, true);
      out.add_row(Row{base + "_sc_up", {sc.col, d}, {1.0, -sc.upper}, Relation::kLessEqual, 0.0});
      out.add_row(Row{base + "_sc_lo", {sc.col, d}, {1.0, -sc.lower}, Relation::kGreaterEqual, 0.0});
      out.lower[sc.col] = std::min(0.0, out.lower[sc.col]);
      out.upper[sc.col] = std::max(out.upper[sc.col], sc.upper);
      if (records) records->push_back({base, "semi-continuous -> on/off binary"});
    }
  }
  if (options.sos) {
    std::vector<SosSet> sets = std::move(out.sos);
    out.sos.clear();
    for (const SosSet& s : sets) lower_sos(out, s, records);
  }
  return out;
}

std::vector<Diagnostic> validate(const GroundModel& model) {
  std::vector<Diagnostic> out;
  const int n = model.num_cols();
  std::vector<int> uses(n, 0);
  for (const Row& r : model.rows) {
    for (std::size_t k = 0; k < r.cols.size(); ++k) {
      if (r.vals[k] != 0.0) ++uses[r.cols[k]];
    }
  }
  auto touch = [&](int c) {
    if (c >= 0 && c < n) ++uses[c];
  };
  for (const auto& s : model.sos) std::for_each(s.cols.begin(), s.cols.end(), touch);
  for (const auto& ind : model.indicators) {
    touch(ind.trigger);
    std::for_each(ind.cols.begin(), ind.cols.end(), touch);
  }
  for (const auto& sc : model.semicontinuous) touch(sc.col);
  for (const auto& p : model.piecewise) {
    touch(p.x);
    touch(p.y);
  }
  for (int j = 0; j < n; ++j) {
    if (uses[j] == 0 && model.objective[j] == 0.0) {
      out.push_back({Diagnostic::Severity::kWarning, "unused_variable",
                     "unused variable '" + model.col_names[j] + "'"});
    } else if (uses[j] == 0) {
      // Objective-only column: unbounded if the improving direction is open.
      double c = model.sense == Sense::kMinimize ? model.objective[j] : -model.objective[j];
      bool open = c < 0 ? !std::isfinite(model.upper[j]) : !std::isfinite(model.lower[j]);
      if (open) {
        out.push_back({Diagnostic::Severity::kWarning, "unbounded_direction",
                       "objective improves without limit along '" + model.col_names[j] + "'"});
      }
    }
  }
  for (const Row& r : model.rows) {
    bool empty = std::all_of(r.vals.begin(), r.vals.end(), [](double v) { return v == 0.0; });
    if (!empty) continue;
    double viol = relation_violation(0.0, r.sense, r.rhs);
    if (viol > 1e-9) {
      out.push_back({Diagnostic::Severity::kWarning, "infeasible_row",
                     "row '" + r.name + "' reads 0 " + std::string(to_string(r.sense)) + " " +
                         std::to_string(r.rhs) + ", which no point satisfies"});
    } else {
      out.push_back({Diagnostic::Severity::kWarning, "empty_row", "row '" + r.name + "' has no coefficients"});
    }
  }
  return out;
}

}  // namespace nlmilp
