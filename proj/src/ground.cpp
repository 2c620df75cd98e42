// Grounding: expands IR fragments against bound data into a GroundModel.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "nlmilp/error.hpp"
#include "nlmilp/ir.hpp"

namespace nlmilp::ir {

namespace {

using Env = std::map<std::string, std::int64_t>;

class Grounder {
 public:
  Grounder(const State& state, const GroundOptions& options) : state_(state), options_(options) {}

  GroundModel run(const std::vector<Fragment>& fragments);

 private:
  std::int64_t size_of(const SizeExpr& size) const {
    if (size.dim.empty()) return size.offset;
    auto extent = state_.resolve_dim(size.dim);
    if (!extent) throw Error(ErrorCode::kMissingData, "no data determines the size of dimension '" + size.dim + "'");
    return *extent + size.offset;
  }

  const std::vector<std::int64_t>& variable_extents(const std::string& symbol);
  int column_of(const SymbolRef& ref, const Env& env);
  double parameter_value(const SymbolRef& ref, const Env& env) const;
  std::int64_t index_value(const IndexExpr& idx, const Env& env, const std::string& symbol) const;
  void check_axis(std::int64_t value, const IndexExpr& idx, const std::string& symbol, const Dim& dim,
                  std::int64_t extent) const;

  // Calls `body` for every assignment of `sets`, first set outermost.
  void for_each(const std::vector<IndexSet>& sets, Env env, const std::function<void(const Env&)>& body) const;

  // Accumulates sign * expr into (terms, constant).
  void expand(const LinExpr& expr, double sign, const Env& env, std::vector<std::pair<int, double>>& terms,
              double& constant);

  double constant_of(const LinExpr& expr, const Env& env, const std::string& what);

  static std::string row_name(const std::string& base, const std::vector<IndexSet>& sets, const Env& env) {
    if (sets.empty()) return base;
    std::vector<std::int64_t> idx;
    for (const auto& s : sets) idx.push_back(env.at(s.name));
    return column_name(base, idx);
  }

  const State& state_;
  GroundOptions options_;
  GroundModel model_;
  std::map<std::string, int> first_column_;
  std::map<std::string, std::vector<std::int64_t>> extents_;
};

std::vector<std::pair<int, double>> merge(const std::vector<std::pair<int, double>>& terms) {
  std::vector<std::pair<int, double>> out;
  std::map<int, std::size_t> slot;
  for (const auto& [col, val] : terms) {
    auto it = slot.find(col);
    if (it == slot.end()) {
      slot[col] = out.size();
      out.emplace_back(col, val);
    } else {
      out[it->second].second += val;
    }
  }
  std::erase_if(out, [](const auto& p) { return p.second == 0.0; });
  return out;
}

const std::vector<std::int64_t>& Grounder::variable_extents(const std::string& symbol) {
  auto it = extents_.find(symbol);
  if (it != extents_.end()) return it->second;
  const Variable* v = state_.find_variable(symbol);
  if (v == nullptr) throw Error(ErrorCode::kUnknownSymbol, "unknown variable '" + symbol + "'");
  std::vector<std::int64_t> extents;
  for (const Dim& d : v->shape) {
    if (const auto* n = std::get_if<std::int64_t>(&d)) {
      extents.push_back(*n);
      continue;
    }
    const std::string& name = std::get<std::string>(d);
    auto extent = state_.resolve_dim(name);
    if (!extent) {
      throw Error(ErrorCode::kMissingData,
                  "no data determines dimension '" + name + "' of variable '" + symbol + "'");
    }
    extents.push_back(*extent);
  }
  // Create every element now so columns of one symbol stay contiguous.
  std::int64_t count = 1;
  for (auto e : extents) count *= e;
  Bounds b = v->effective_bounds();
  bool is_integer = v->type != VarType::kContinuous;
  first_column_[symbol] = model_.num_cols();
  std::vector<std::int64_t> idx(extents.size(), 0);
  for (std::int64_t k = 0; k < count; ++k) {
    model_.add_column(column_name(symbol, idx), 0.0, b.lower, b.upper, is_integer);
    for (std::size_t axis = idx.size(); axis-- > 0;) {
      if (++idx[axis] < extents[axis]) break;
      idx[axis] = 0;
    }
  }
  return extents_.emplace(symbol, std::move(extents)).first->second;
}

void Grounder::check_axis(std::int64_t value, const IndexExpr& idx, const std::string& symbol, const Dim& dim,
                          std::int64_t extent) const {
  if (value >= 0 && value < extent) return;
  std::string label = idx.name.empty() ? std::to_string(value) : idx.name;
  if (!idx.name.empty() && idx.offset != 0) {
    label += (idx.offset > 0 ? "+" : "") + std::to_string(idx.offset);
  }
  throw Error(ErrorCode::kIndexOutOfRange, "index " + label + " = " + std::to_string(value) +
                                               " is out of range for " + symbol + " (" + dim_to_string(dim) +
                                               " = " + std::to_string(extent) + ")");
}

std::int64_t Grounder::index_value(const IndexExpr& idx, const Env& env, const std::string& symbol) const {
  if (idx.name.empty()) return idx.offset;
  auto it = env.find(idx.name);
  if (it == env.end()) {
    throw Error(ErrorCode::kParseError, "index '" + idx.name + "' of " + symbol + " is not bound");
  }
  return it->second + idx.offset;
}

int Grounder::column_of(const SymbolRef& ref, const Env& env) {
  const auto& extents = variable_extents(ref.symbol);
  const Variable* v = state_.find_variable(ref.symbol);
  std::int64_t flat = 0;
  for (std::size_t axis = 0; axis < extents.size(); ++axis) {
    std::int64_t value = index_value(ref.indices[axis], env, ref.symbol);
    check_axis(value, ref.indices[axis], ref.symbol, v->shape[axis], extents[axis]);
    flat = flat * extents[axis] + value;
  }
  return first_column_.at(ref.symbol) + static_cast<int>(flat);
}

double Grounder::parameter_value(const SymbolRef& ref, const Env& env) const {
  const Parameter* p = state_.find_parameter(ref.symbol);
  if (p == nullptr) throw Error(ErrorCode::kUnknownSymbol, "unknown parameter '" + ref.symbol + "'");
  const Tensor* t = state_.find_data(ref.symbol);
  if (t == nullptr) throw Error(ErrorCode::kMissingData, "no data bound for parameter '" + ref.symbol + "'");
  if (t->shape.size() != ref.indices.size()) {
    throw Error(ErrorCode::kShapeMismatch, "data for '" + ref.symbol + "' has rank " +
                                               std::to_string(t->shape.size()) + " but is used with " +
                                               std::to_string(ref.indices.size()) + " index(es)");
  }
  std::int64_t flat = 0;
  for (std::size_t axis = 0; axis < ref.indices.size(); ++axis) {
    std::int64_t value = index_value(ref.indices[axis], env, ref.symbol);
    Dim dim = axis < p->shape.size() ? p->shape[axis] : Dim{t->shape[axis]};
    check_axis(value, ref.indices[axis], ref.symbol, dim, t->shape[axis]);
    flat = flat * t->shape[axis] + value;
  }
  return t->values.at(static_cast<std::size_t>(flat));
}

void Grounder::for_each(const std::vector<IndexSet>& sets, Env env,
                        const std::function<void(const Env&)>& body) const {
  std::function<void(std::size_t)> rec = [&](std::size_t level) {
    if (level == sets.size()) {
      body(env);
      return;
    }
    const IndexSet& s = sets[level];
    std::int64_t end = size_of(s.end);
    for (std::int64_t v = s.start; v < end; ++v) {
      env[s.name] = v;
      rec(level + 1);
    }
    env.erase(s.name);
  };
  rec(0);
}

void Grounder::expand(const LinExpr& expr, double sign, const Env& env, std::vector<std::pair<int, double>>& terms,
                      double& constant) {
  for (const LinTerm& t : expr.terms) {
    for_each(t.sums, env, [&](const Env& inner) {
      double coef = sign * t.coefficient;
      for (const auto& p : t.parameters) coef *= parameter_value(p, inner);
      if (t.variable) {
        int col = column_of(*t.variable, inner);
        terms.emplace_back(col, coef);
      } else {
        constant += coef;
      }
    });
  }
}

double Grounder::constant_of(const LinExpr& expr, const Env& env, const std::string& what) {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;
  expand(expr, 1.0, env, terms, constant);
  if (!terms.empty()) throw Error(ErrorCode::kInvalidAnnotation, what + " must not involve variables");
  return constant;
}

GroundModel Grounder::run(const std::vector<Fragment>& fragments) {
  const IRObjective* objective = nullptr;
  std::string objective_clause;
  for (const Fragment& f : fragments) {
    for (const Statement& s : f.statements) {
      if (const auto* o = std::get_if<IRObjective>(&s)) {
        if (objective != nullptr) {
          throw Error(ErrorCode::kObjectiveConflict,
                      "objectives in both '" + objective_clause + "' and '" + f.clause_id + "'");
        }
        objective = o;
        objective_clause = f.clause_id;
      }
    }
  }
  if (objective == nullptr) throw Error(ErrorCode::kNoObjectiveFound, "no objective among the coded clauses");

  // The objective's columns come first.
  {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;
    expand(objective->expr, 1.0, {}, terms, constant);
    model_.sense = objective->sense;
    model_.objective_offset = constant;
    for (const auto& [col, val] : terms) model_.objective[col] += val;
  }

  for (const Fragment& f : fragments) {
    int ordinal = 0;
    int non_objective = 0;
    for (const Statement& s : f.statements) {
      if (!std::holds_alternative<IRObjective>(s)) ++non_objective;
    }
    for (const Statement& s : f.statements) {
      if (std::holds_alternative<IRObjective>(s)) continue;
      ++ordinal;
      std::string base = non_objective > 1 ? f.clause_id + "_" + std::to_string(ordinal) : f.clause_id;
      if (const auto* c = std::get_if<IRConstraint>(&s)) {
        for_each(c->index_sets, {}, [&](const Env& env) {
          std::vector<std::pair<int, double>> terms;
          double constant = 0.0;
          expand(c->lhs, 1.0, env, terms, constant);
          expand(c->rhs, -1.0, env, terms, constant);
          Row row;
          row.name = row_name(base, c->index_sets, env);
          for (const auto& [col, val] : merge(terms)) {
            row.cols.push_back(col);
            row.vals.push_back(val);
          }
          row.sense = c->relation;
          row.rhs = -constant;
          model_.add_row(std::move(row));
        });
        continue;
      }
      const auto& a = std::get<StructureAnnotation>(s);
      for_each(a.index_sets, {}, [&](const Env& env) {
        std::string name = row_name(base, a.index_sets, env);
        switch (a.kind) {
          case AnnotationKind::kSOS1:
          case AnnotationKind::kSOS2: {
            SosSet set;
            set.name = name;
            set.type = a.kind == AnnotationKind::kSOS1 ? 1 : 2;
            auto add_member = [&](const Env& e) {
              for (const auto& m : a.members) {
                int col = column_of(m, e);
                if (std::find(set.cols.begin(), set.cols.end(), col) != set.cols.end()) {
                  throw Error(ErrorCode::kInvalidAnnotation, "SOS '" + name + "' repeats a member");
                }
                set.cols.push_back(col);
                set.weights.push_back(static_cast<double>(set.cols.size()));
              }
            };
            if (a.member_range) {
              for_each({*a.member_range}, env, add_member);
            } else {
              add_member(env);
            }
            if (set.cols.size() < 2) {
              throw Error(ErrorCode::kInvalidAnnotation, "SOS '" + name + "' needs at least 2 members");
            }
            model_.sos.push_back(std::move(set));
            break;
          }
          case AnnotationKind::kIndicator: {
            const Variable* trig = state_.find_variable(a.trigger->symbol);
            if (trig == nullptr || trig->type != VarType::kBinary) {
              throw Error(ErrorCode::kInvalidAnnotation, "indicator trigger '" + a.trigger->symbol + "' is not binary");
            }
            IndicatorRow ind;
            ind.name = name;
            ind.trigger = column_of(*a.trigger, env);
            ind.trigger_value = a.trigger_value;
            std::vector<std::pair<int, double>> terms;
            double constant = 0.0;
            expand(a.lhs, 1.0, env, terms, constant);
            expand(a.rhs, -1.0, env, terms, constant);
            for (const auto& [col, val] : merge(terms)) {
              if (col == ind.trigger) {
                throw Error(ErrorCode::kInvalidAnnotation, "indicator '" + name + "' uses its trigger in the implied row");
              }
              ind.cols.push_back(col);
              ind.vals.push_back(val);
            }
            ind.sense = a.relation;
            ind.rhs = -constant;
            ind.big_m = a.big_m.value_or(options_.default_big_m);
            model_.indicators.push_back(std::move(ind));
            break;
          }
          case AnnotationKind::kSemiContinuous: {
            SemiContinuous sc;
            sc.col = column_of(a.members[0], env);
            sc.lower = constant_of(a.lower, env, "semi-continuous lower bound");
            sc.upper = constant_of(a.upper, env, "semi-continuous upper bound");
            if (!(sc.lower > 0.0 && sc.lower <= sc.upper)) {
              throw Error(ErrorCode::kInvalidAnnotation, "semi-continuous '" + name + "' needs 0 < lower <= upper");
            }
            for (const SemiContinuous& other : model_.semicontinuous) {
              if (other.col == sc.col) {
                throw Error(ErrorCode::kInvalidAnnotation, "column '" + model_.col_names[sc.col] +
                                                               "' is declared semi-continuous twice");
              }
            }
            model_.lower[sc.col] = 0.0;
            model_.upper[sc.col] = sc.upper;
            model_.semicontinuous.push_back(sc);
            break;
          }
          case AnnotationKind::kPiecewiseLinear: {
            PiecewiseLinear pw;
            pw.name = name;
            pw.y = column_of(a.members[0], env);
            pw.x = column_of(a.members[1], env);
            pw.points = a.breakpoints;
            if (pw.points.size() < 2) {
              throw Error(ErrorCode::kInvalidAnnotation, "piecewise-linear '" + name + "' needs at least 2 breakpoints");
            }
            for (std::size_t k = 1; k < pw.points.size(); ++k) {
              if (!(pw.points[k].first > pw.points[k - 1].first)) {
                throw Error(ErrorCode::kInvalidAnnotation,
                            "piecewise-linear '" + name + "' breakpoints must be strictly increasing in x");
              }
            }
            model_.piecewise.push_back(std::move(pw));
            break;
          }
        }
      });
    }
  }

  for (const Variable& v : state_.variables()) {
    if (!first_column_.count(v.symbol)) variable_extents(v.symbol);
  }
  model_.check();
  return std::move(model_);
}

std::string index_to_string(const IndexExpr& idx) {
  if (idx.name.empty()) return std::to_string(idx.offset);
  if (idx.offset == 0) return idx.name;
  return idx.name + (idx.offset > 0 ? "+" : "") + std::to_string(idx.offset);
}

std::string ref_to_string(const SymbolRef& ref) {
  if (ref.indices.empty()) return ref.symbol;
  std::string out = ref.symbol + "_{";
  for (std::size_t k = 0; k < ref.indices.size(); ++k) {
    if (k) out += ",";
    out += index_to_string(ref.indices[k]);
  }
  return out + "}";
}

std::string size_to_string(const SizeExpr& s) {
  if (s.dim.empty()) return std::to_string(s.offset);
  if (s.offset == 0) return s.dim;
  return s.dim + (s.offset > 0 ? "+" : "") + std::to_string(s.offset);
}

std::string set_to_string(const IndexSet& s) {
  std::string out = s.name + " in ";
  if (s.start != 0) out += std::to_string(s.start) + ":";
  return out + size_to_string(s.end);
}

std::string expr_to_string(const LinExpr& e) {
  if (e.terms.empty()) return "0";
  std::string out;
  for (std::size_t k = 0; k < e.terms.size(); ++k) {
    const LinTerm& t = e.terms[k];
    double c = t.coefficient;
    if (k) out += c < 0 ? " - " : " + ";
    else if (c < 0) out += "-";
    double mag = std::fabs(c);
    std::string body;
    if (!t.sums.empty()) {
      body += "sum_{";
      for (std::size_t s = 0; s < t.sums.size(); ++s) {
        if (s) body += ", ";
        body += set_to_string(t.sums[s]);
      }
      body += "} ";
    }
    std::vector<std::string> factors;
    bool symbolic = !t.parameters.empty() || t.variable;
    if (mag != 1.0 || !symbolic) factors.push_back(format_number(mag));
    for (const auto& p : t.parameters) factors.push_back(ref_to_string(p));
    if (t.variable) factors.push_back(ref_to_string(*t.variable));
    for (std::size_t f = 0; f < factors.size(); ++f) {
      if (f) body += " * ";
      body += factors[f];
    }
    out += body;
  }
  return out;
}

std::string forall_to_string(const std::vector<IndexSet>& sets) {
  if (sets.empty()) return "";
  std::string out = " forall ";
  for (std::size_t k = 0; k < sets.size(); ++k) {
    if (k) out += ", ";
    out += set_to_string(sets[k]);
  }
  return out;
}

std::string relation_text(Relation r) {
  switch (r) {
    case Relation::kLessEqual: return "<=";
    case Relation::kEqual: return "=";
    case Relation::kGreaterEqual: return ">=";
  }
  return "<=";
}

nlohmann::json expr_json(const LinExpr& e) {
  nlohmann::json out = nlohmann::json::array();
  auto ref_json = [](const SymbolRef& r) {
    nlohmann::json idx = nlohmann::json::array();
    for (const auto& i : r.indices) idx.push_back(index_to_string(i));
    return nlohmann::json{{"symbol", r.symbol}, {"indices", idx}};
  };
  for (const auto& t : e.terms) {
    nlohmann::json term{{"coefficient", t.coefficient}};
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : t.parameters) params.push_back(ref_json(p));
    term["parameters"] = params;
    term["variable"] = t.variable ? ref_json(*t.variable) : nlohmann::json();
    nlohmann::json sums = nlohmann::json::array();
    for (const auto& s : t.sums) sums.push_back(set_to_string(s));
    term["sums"] = sums;
    out.push_back(term);
  }
  return out;
}

nlohmann::json sets_json(const std::vector<IndexSet>& sets) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : sets) out.push_back(set_to_string(s));
  return out;
}

}  // namespace

std::string column_name(const std::string& symbol, const std::vector<std::int64_t>& index) {
  if (index.empty()) return symbol;
  std::string out = symbol + "(";
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(index[k]);
  }
  return out + ")";
}

GroundModel ground(const std::vector<Fragment>& fragments, const State& state, const GroundOptions& options) {
  return Grounder(state, options).run(fragments);
}

std::string describe(const Statement& statement) {
  if (const auto* c = std::get_if<IRConstraint>(&statement)) {
    return expr_to_string(c->lhs) + " " + relation_text(c->relation) + " " + expr_to_string(c->rhs) +
           forall_to_string(c->index_sets);
  }
  if (const auto* o = std::get_if<IRObjective>(&statement)) {
    return std::string(o->sense == Sense::kMinimize ? "minimize " : "maximize ") + expr_to_string(o->expr);
  }
  const auto& a = std::get<StructureAnnotation>(statement);
  std::string out;
  switch (a.kind) {
    case AnnotationKind::kSOS1:
    case AnnotationKind::kSOS2: {
      out = a.kind == AnnotationKind::kSOS1 ? "sos1(" : "sos2(";
      if (a.member_range) {
        out += ref_to_string(a.members[0]) + " over " + set_to_string(*a.member_range);
      } else {
        for (std::size_t k = 0; k < a.members.size(); ++k) {
          if (k) out += ", ";
          out += ref_to_string(a.members[k]);
        }
      }
      out += ")";
      break;
    }
    case AnnotationKind::kIndicator:
      out = ref_to_string(*a.trigger) + " = " + std::to_string(a.trigger_value) + " -> " + expr_to_string(a.lhs) +
            " " + relation_text(a.relation) + " " + expr_to_string(a.rhs);
      if (a.big_m) out += " with M = " + format_number(*a.big_m);
      break;
    case AnnotationKind::kSemiContinuous:
      out = "semicont(" + ref_to_string(a.members[0]) + ", " + expr_to_string(a.lower) + ", " +
            expr_to_string(a.upper) + ")";
      break;
    case AnnotationKind::kPiecewiseLinear:
      out = "pwl(" + ref_to_string(a.members[0]) + ", " + ref_to_string(a.members[1]);
      for (const auto& [x, y] : a.breakpoints) out += ", (" + format_number(x) + ", " + format_number(y) + ")";
      out += ")";
      break;
  }
  return out + forall_to_string(a.index_sets);
}

nlohmann::json statement_to_json(const Statement& statement) {
  nlohmann::json out;
  if (const auto* c = std::get_if<IRConstraint>(&statement)) {
    out = {{"type", "constraint"},
           {"index_sets", sets_json(c->index_sets)},
           {"lhs", expr_json(c->lhs)},
           {"relation", relation_text(c->relation)},
           {"rhs", expr_json(c->rhs)}};
  } else if (const auto* o = std::get_if<IRObjective>(&statement)) {
    out = {{"type", "objective"},
           {"sense", o->sense == Sense::kMinimize ? "minimize" : "maximize"},
           {"expr", expr_json(o->expr)}};
  } else {
    const auto& a = std::get<StructureAnnotation>(statement);
    out = {{"type", "annotation"}, {"kind", std::string(to_string(a.kind))}, {"index_sets", sets_json(a.index_sets)}};
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : a.members) members.push_back(ref_to_string(m));
    out["members"] = members;
    if (a.member_range) out["member_range"] = set_to_string(*a.member_range);
    if (a.trigger) {
      out["trigger"] = ref_to_string(*a.trigger);
      out["trigger_value"] = a.trigger_value;
      out["lhs"] = expr_json(a.lhs);
      out["relation"] = relation_text(a.relation);
      out["rhs"] = expr_json(a.rhs);
      if (a.big_m) out["big_m"] = *a.big_m;
    }
    if (a.kind == AnnotationKind::kSemiContinuous) {
      out["lower"] = expr_json(a.lower);
      out["upper"] = expr_json(a.upper);
    }
    if (!a.breakpoints.empty()) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& [x, y] : a.breakpoints) pts.push_back({x, y});
      out["breakpoints"] = pts;
    }
  }
  out["text"] = describe(statement);
  return out;
}

}  // namespace nlmilp::ir
