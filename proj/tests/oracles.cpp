#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace oracle {

using namespace nlmilp;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Round to a few decimals so LP text stays short and exact.
double nice(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

sift::StandardForm random_standard_lp(int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  sift::StandardForm f;
  f.rows = m;
  f.columns.resize(n);
  std::vector<double> x0(n, 0.0);
  for (int j = 0; j < n; ++j) {
    if (uniform(rng, 0, 1) < 0.3) x0[j] = nice(uniform(rng, 0.0, 5.0));
    f.c.push_back(nice(uniform(rng, 1.0, 10.0)));
    for (int i = 0; i < m; ++i) {
      if (uniform(rng, 0, 1) < 0.6) f.columns[j].emplace_back(i, nice(uniform(rng, -1.0, 4.0)));
    }
  }
  f.b.assign(m, 0.0);
  for (int j = 0; j < n; ++j) {
    for (const auto& [i, a] : f.columns[j]) f.b[i] += a * x0[j];
  }
  return f;
}

std::vector<double> dense_reduced_costs(const sift::StandardForm& form, const std::vector<double>& y) {
  std::vector<std::vector<double>> A(form.rows, std::vector<double>(form.num_cols(), 0.0));
  for (int j = 0; j < form.num_cols(); ++j) {
    for (const auto& [i, a] : form.columns[j]) A[i][j] += a;
  }
  std::vector<double> d(form.c);
  for (int i = 0; i < form.rows; ++i) {
    for (int j = 0; j < form.num_cols(); ++j) d[j] -= A[i][j] * y[i];
  }
  return d;
}

GroundModel random_covering_lp(int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GroundModel g;
  g.name = "cover";
  for (int j = 0; j < n; ++j) g.add_column("x" + std::to_string(j), nice(uniform(rng, 1.0, 9.0)), 0.0, 1.0, false);
  for (int i = 0; i < m; ++i) {
    Row r;
    r.name = "cover" + std::to_string(i);
    for (int j = 0; j < n; ++j) {
      if (uniform(rng, 0, 1) < 0.3) {
        r.cols.push_back(j);
        r.vals.push_back(1.0);
      }
    }
    if (r.cols.empty()) {
      r.cols.push_back(pick(rng, 0, n - 1));
      r.vals.push_back(1.0);
    }
    r.sense = Relation::kGreaterEqual;
    r.rhs = 1.0;
    g.add_row(std::move(r));
  }
  return g;
}

GroundModel random_bounded_lp(int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GroundModel g;
  g.name = "bounded";
  g.sense = pick(rng, 0, 1) ? Sense::kMinimize : Sense::kMaximize;
  std::vector<double> x0;
  for (int j = 0; j < n; ++j) {
    double lo = nice(uniform(rng, -3.0, 1.0));
    double hi = lo + nice(uniform(rng, 1.0, 6.0));
    g.add_column("x" + std::to_string(j), nice(uniform(rng, -5.0, 5.0)), lo, hi, false);
    x0.push_back(nice(uniform(rng, lo, hi)));
  }
  for (int i = 0; i < m; ++i) {
    Row r;
    r.name = "c" + std::to_string(i);
    double act = 0.0;
    for (int j = 0; j < n; ++j) {
      if (uniform(rng, 0, 1) < 0.5) {
        double a = nice(uniform(rng, -3.0, 3.0));
        if (a == 0.0) continue;
        r.cols.push_back(j);
        r.vals.push_back(a);
        act += a * x0[j];
      }
    }
    int kind = pick(rng, 0, 2);
    r.sense = kind == 0 ? Relation::kLessEqual : kind == 1 ? Relation::kGreaterEqual : Relation::kEqual;
    // rounding keeps x0 feasible with slack for the inequalities
    r.rhs = r.sense == Relation::kLessEqual ? std::ceil(act) + 1 : r.sense == Relation::kGreaterEqual ? std::floor(act) - 1 : act;
    if (r.sense == Relation::kEqual && r.cols.empty()) r.rhs = 0.0;
    g.add_row(std::move(r));
  }
  return g;
}

GroundModel random_annotated_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GroundModel g;
  g.name = "rand" + std::to_string(seed);
  g.sense = pick(rng, 0, 1) ? Sense::kMinimize : Sense::kMaximize;
  g.objective_offset = pick(rng, 0, 2) == 0 ? nice(uniform(rng, -10, 10)) : 0.0;
  int n = pick(rng, 3, 9);
  for (int j = 0; j < n; ++j) {
    int t = pick(rng, 0, 3);
    std::string name = (t == 3 ? "b" : "x") + std::to_string(j);
    double lo = t == 3 ? 0.0 : (pick(rng, 0, 3) == 0 ? -kInfinity : nice(uniform(rng, -2, 2)));
    double hi = t == 3 ? 1.0 : (pick(rng, 0, 2) == 0 ? kInfinity : nice(uniform(rng, 3, 9)));
    g.add_column(name, pick(rng, 0, 4) == 0 ? 0.0 : nice(uniform(rng, -5, 5)), lo, hi, t >= 2);
  }
  int m = pick(rng, 0, 6);
  for (int i = 0; i < m; ++i) {
    Row r;
    r.name = "c" + std::to_string(i);
    for (int j = 0; j < n; ++j) {
      if (pick(rng, 0, 2) == 0) {
        double a = nice(uniform(rng, -4, 4));
        if (a == 0.0) a = 1.0;
        r.cols.push_back(j);
        r.vals.push_back(a);
      }
    }
    if (r.cols.empty()) {
      r.cols.push_back(0);
      r.vals.push_back(1.0);
    }
    int k = pick(rng, 0, 2);
    r.sense = k == 0 ? Relation::kLessEqual : k == 1 ? Relation::kGreaterEqual : Relation::kEqual;
    r.rhs = nice(uniform(rng, -10, 10));
    g.add_row(std::move(r));
  }
  // SOS over non-negative bounded columns
  std::vector<int> pool;
  for (int j = 0; j < n; ++j) {
    if (g.lower[j] == 0.0 || (g.lower[j] >= 0 && std::isfinite(g.upper[j]))) pool.push_back(j);
  }
  if (pool.size() >= 2 && pick(rng, 0, 1)) {
    std::shuffle(pool.begin(), pool.end(), rng);
    SosSet s;
    s.name = "s1";
    s.type = pick(rng, 1, 2);
    int k = pick(rng, 2, static_cast<int>(pool.size()));
    for (int t = 0; t < k; ++t) {
      s.cols.push_back(pool[t]);
      s.weights.push_back(t + 1);
    }
    g.sos.push_back(s);
  }
  std::vector<int> binaries;
  for (int j = 0; j < n; ++j) {
    if (g.integer[j] && g.lower[j] == 0.0 && g.upper[j] == 1.0) binaries.push_back(j);
  }
  if (!binaries.empty() && pick(rng, 0, 1)) {
    IndicatorRow ind;
    ind.name = "ind0";
    ind.trigger = binaries[pick(rng, 0, static_cast<int>(binaries.size()) - 1)];
    ind.trigger_value = pick(rng, 0, 1);
    int j = pick(rng, 0, n - 1);
    if (j == ind.trigger) j = (j + 1) % n;
    ind.cols = {j};
    ind.vals = {nice(uniform(rng, 1, 3))};
    ind.sense = pick(rng, 0, 1) ? Relation::kLessEqual : Relation::kGreaterEqual;
    ind.rhs = nice(uniform(rng, -3, 3));
    g.indicators.push_back(ind);
  }
  return g;
}

State random_state(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  State s("background " + std::to_string(seed));
  s.set_description("problem " + std::to_string(seed) + (seed % 3 == 0 ? " with \"quotes\" and \\slashes\n" : ""));
  int K = pick(rng, 1, 4);
  s.add_parameter({"K", {}, "count"});
  s.bind_data("K", Tensor::scalar(K));
  std::vector<std::string> symbols{"K"};
  int np = pick(rng, 0, 4);
  for (int p = 0; p < np; ++p) {
    std::string sym = "p" + std::to_string(p);
    bool vec = pick(rng, 0, 1);
    s.add_parameter({sym, vec ? Shape{std::string("K")} : Shape{}, "param " + std::to_string(p)});
    if (pick(rng, 0, 1)) {
      Tensor t;
      if (vec) t.shape = {K};
      for (int i = 0; i < (vec ? K : 1); ++i) t.values.push_back(nice(uniform(rng, -5, 5)));
      s.bind_data(sym, t);
    }
    symbols.push_back(sym);
  }
  int nv = pick(rng, 0, 4);
  for (int v = 0; v < nv; ++v) {
    Variable var;
    var.symbol = "v" + std::to_string(v);
    var.shape = pick(rng, 0, 1) ? Shape{std::string("K")} : Shape{std::int64_t{pick(rng, 1, 3)}};
    var.definition = "var " + std::to_string(v);
    var.type = static_cast<VarType>(pick(rng, 0, 2));
    if (var.type != VarType::kBinary && pick(rng, 0, 1)) var.bounds = Bounds{0.0, nice(uniform(rng, 1, 9))};
    s.add_variable(var);
    symbols.push_back(var.symbol);
  }
  int nc = pick(rng, 0, 5);
  for (int c = 0; c < nc; ++c) {
    Clause cl;
    cl.id = s.next_clause_id();
    cl.kind = c == 0 && pick(rng, 0, 1) ? ClauseKind::kObjective : ClauseKind::kConstraint;
    cl.description = "clause " + std::to_string(c);
    cl.status = static_cast<ClauseStatus>(pick(rng, 0, 2));
    if (cl.status != ClauseStatus::kExtracted) cl.formulation = "f" + std::to_string(c);
    if (cl.status == ClauseStatus::kCoded) cl.fragment = "code " + std::to_string(c);
    if (pick(rng, 0, 1)) cl.confidence = pick(rng, 1, 5);
    cl.low_confidence = pick(rng, 0, 3) == 0;
    s.add_clause(cl);
    for (const auto& sym : symbols) {
      if (pick(rng, 0, 2) == 0) s.connect(cl.id, sym);
    }
  }
  return s;
}

namespace {

using CanonRow = std::pair<std::string, std::vector<std::pair<int, double>>>;

std::vector<std::pair<int, double>> merged(const Row& r, double flip, const std::vector<int>& perm) {
  std::map<int, double> acc;
  for (std::size_t k = 0; k < r.cols.size(); ++k) acc[perm[r.cols[k]]] += flip * r.vals[k];
  std::vector<std::pair<int, double>> out;
  for (const auto& [j, a] : acc) {
    if (a != 0.0) out.emplace_back(j, a);
  }
  return out;
}

std::vector<CanonRow> canon_rows(const GroundModel& g, const std::vector<int>& perm) {
  std::vector<CanonRow> rows;
  for (const Row& r : g.rows) {
    bool ge = r.sense == Relation::kGreaterEqual;
    double flip = ge ? -1.0 : 1.0;
    std::ostringstream key;
    key << (r.sense == Relation::kEqual ? "E" : "L") << ' ' << (flip * r.rhs == 0.0 ? 0.0 : flip * r.rhs);
    rows.emplace_back(key.str(), merged(r, flip, perm));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

bool same_column(const GroundModel& a, int i, const GroundModel& b, int j) {
  return a.objective[i] == b.objective[j] && a.integer[i] == b.integer[j] && a.lower[i] == b.lower[j] &&
         a.upper[i] == b.upper[j];
}

}  // namespace

std::optional<std::pair<std::vector<int>, std::vector<int>>> brute_force_equivalent(const GroundModel& a,
                                                                                     const GroundModel& b) {
  if (a.sense != b.sense || a.num_cols() != b.num_cols() || a.num_rows() != b.num_rows()) return std::nullopt;
  const int n = a.num_cols();
  std::vector<int> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  std::vector<CanonRow> target = canon_rows(b, identity);
  std::vector<int> perm = identity;
  do {
    bool ok = true;
    for (int j = 0; j < n && ok; ++j) ok = same_column(a, j, b, perm[j]);
    if (!ok) continue;
    if (canon_rows(a, perm) != target) continue;
    // constraint map: match canonical rows one by one
    std::vector<int> cons(a.num_rows(), -1);
    std::vector<char> used(b.num_rows(), 0);
    for (int i = 0; i < a.num_rows(); ++i) {
      std::vector<int> single{i};
      GroundModel ai;
      ai.rows = {a.rows[i]};
      auto ci = canon_rows(ai, perm);
      for (int k = 0; k < b.num_rows(); ++k) {
        if (used[k]) continue;
        GroundModel bk;
        bk.rows = {b.rows[k]};
        if (canon_rows(bk, identity) == ci) {
          used[k] = 1;
          cons[i] = k;
          break;
        }
      }
    }
    return std::make_pair(perm, cons);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::nullopt;
}

SimpleGraph random_graph(int max_vertices, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int v = pick(rng, 1, max_vertices);
  double p = uniform(rng, 0.2, 0.7);
  SimpleGraph g{v, {}};
  for (int a = 0; a < v; ++a) {
    for (int b = a + 1; b < v; ++b) {
      if (uniform(rng, 0, 1) < p) g.second.emplace_back(a, b);
    }
  }
  return g;
}

bool brute_force_isomorphic(const SimpleGraph& a, const SimpleGraph& b) {
  if (a.first != b.first || a.second.size() != b.second.size()) return false;
  const int n = a.first;
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (const auto& [u, v] : b.second) adj[u][v] = adj[v][u] = 1;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (const auto& [u, v] : a.second) {
      if (!adj[perm[u]][perm[v]]) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

namespace {

GroundModel small_formulation(std::mt19937_64& rng) {
  static const double coefs[] = {-2, -1, 1, 2, 3};
  GroundModel g;
  g.sense = pick(rng, 0, 3) == 0 ? Sense::kMaximize : Sense::kMinimize;
  int n = pick(rng, 1, 6), m = pick(rng, 0, 6);
  for (int j = 0; j < n; ++j) {
    g.add_column("x" + std::to_string(j), pick(rng, 0, 2) == 0 ? 0.0 : coefs[pick(rng, 0, 4)], 0.0, kInfinity,
                 pick(rng, 0, 4) == 0);
  }
  for (int i = 0; i < m; ++i) {
    Row r;
    r.name = "c" + std::to_string(i);
    for (int j = 0; j < n; ++j) {
      if (pick(rng, 0, 1)) {
        r.cols.push_back(j);
        r.vals.push_back(coefs[pick(rng, 0, 4)]);
      }
    }
    int k = pick(rng, 0, 2);
    r.sense = k == 0 ? Relation::kLessEqual : k == 1 ? Relation::kGreaterEqual : Relation::kEqual;
    r.rhs = pick(rng, -2, 4);
    g.add_row(std::move(r));
  }
  return g;
}

GroundModel graph_model(const SimpleGraph& sg) {
  GroundModel g;
  for (int v = 0; v < sg.first; ++v) g.add_column("x" + std::to_string(v), 0.0, 0.0, kInfinity, false);
  int k = 0;
  for (const auto& [u, v] : sg.second) g.add_row({"e" + std::to_string(k++), {u, v}, {1.0, 1.0}, Relation::kEqual, 1.0});
  return g;
}

}  // namespace

GroundModel permuted(const GroundModel& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = g.num_cols();
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);  // old j -> new p[j]
  std::vector<int> inv(n);
  for (int j = 0; j < n; ++j) inv[p[j]] = j;
  GroundModel out;
  out.sense = g.sense;
  out.objective_offset = g.objective_offset;
  for (int k = 0; k < n; ++k) {
    int j = inv[k];
    out.add_column("y" + std::to_string(k), g.objective[j], g.lower[j], g.upper[j], g.integer[j]);
  }
  std::vector<int> rows(g.num_rows());
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  for (int i : rows) {
    Row r = g.rows[i];
    r.name = "d" + std::to_string(i);
    for (int& c : r.cols) c = p[c];
    if (r.sense == Relation::kLessEqual && pick(rng, 0, 1)) {
      r.sense = Relation::kGreaterEqual;
      r.rhs = -r.rhs;
      for (double& v : r.vals) v = -v;
    }
    // shuffle term order too
    std::vector<std::size_t> order(r.cols.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Row s = r;
    for (std::size_t k = 0; k < order.size(); ++k) {
      s.cols[k] = r.cols[order[k]];
      s.vals[k] = r.vals[order[k]];
    }
    out.add_row(std::move(s));
  }
  return out;
}

std::vector<EquivCase> equivalence_corpus(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<EquivCase> out;
  for (int c = 0; c < count; ++c) {
    EquivCase ec;
    std::uint64_t sub = rng();
    switch (c % 5) {
      case 0:
      case 1: {
        ec.kind = "twin";
        ec.a = small_formulation(rng);
        ec.b = permuted(ec.a, sub);
        break;
      }
      case 2: {
        ec.kind = "perturbed";
        ec.a = small_formulation(rng);
        ec.b = permuted(ec.a, sub);
        if (ec.b.num_rows() > 0 && pick(rng, 0, 1)) {
          Row& r = ec.b.rows[pick(rng, 0, ec.b.num_rows() - 1)];
          if (!r.vals.empty()) {
            r.vals[0] = r.vals[0] == 1.0 ? 2.0 : 1.0;
          } else {
            r.rhs += 1;
          }
        } else {
          int j = pick(rng, 0, ec.b.num_cols() - 1);
          ec.b.objective[j] = ec.b.objective[j] == 1.0 ? -1.0 : 1.0;
        }
        break;
      }
      case 3: {
        ec.kind = "random";
        ec.a = small_formulation(rng);
        do {
          ec.b = small_formulation(rng);
        } while (ec.b.num_cols() != ec.a.num_cols() && pick(rng, 0, 3) != 0);
        break;
      }
      case 4: {
        ec.kind = "graph";
        SimpleGraph ga = random_graph(8, sub);
        SimpleGraph gb;
        if (pick(rng, 0, 1)) {
          // relabeled copy
          std::vector<int> p(ga.first);
          std::iota(p.begin(), p.end(), 0);
          std::shuffle(p.begin(), p.end(), rng);
          gb.first = ga.first;
          for (auto [u, v] : ga.second) gb.second.emplace_back(std::min(p[u], p[v]), std::max(p[u], p[v]));
          std::shuffle(gb.second.begin(), gb.second.end(), rng);
        } else {
          // same vertex and edge counts, random edges
          gb.first = ga.first;
          std::vector<std::pair<int, int>> all;
          for (int u = 0; u < ga.first; ++u) {
            for (int v = u + 1; v < ga.first; ++v) all.emplace_back(u, v);
          }
          std::shuffle(all.begin(), all.end(), rng);
          all.resize(ga.second.size());
          gb.second = all;
        }
        ec.graphs = std::make_pair(ga, gb);
        ec.a = graph_model(ga);
        ec.b = graph_model(gb);
        break;
      }
    }
    out.push_back(std::move(ec));
  }
  return out;
}

using structure::StructureProposal;

void mutate_state(State& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  for (int step = 0; step < 4; ++step) {
    switch (pick(5)) {
      case 0:
        if (!s.clauses().empty()) s.remove_clause(s.clauses()[pick(static_cast<int>(s.clauses().size()))].id);
        break;
      case 1:
        if (!s.variables().empty()) s.remove_symbol(s.variables()[pick(static_cast<int>(s.variables().size()))].symbol);
        break;
      case 2:
        if (s.parameters().size() > 1) {
          // K names a dimension; leave it alone.
          const auto& p = s.parameters()[1 + pick(static_cast<int>(s.parameters().size()) - 1)];
          s.clear_data(p.symbol);
          s.parameter_to_variable(p.symbol, VarType::kContinuous);
        }
        break;
      case 3:
        if (!s.variables().empty()) s.variable_to_parameter(s.variables()[pick(static_cast<int>(s.variables().size()))].symbol);
        break;
      case 4:
        if (!s.clauses().empty()) s.disconnect_clause(s.clauses()[pick(static_cast<int>(s.clauses().size()))].id);
        break;
    }
  }
}


// b binary, y in [0, 10], w in [1, 5]; c1 objective, c2..c4 constraints.
State structure_toy_state() {
  State s;
  s.add_parameter({"K", {}, ""});
  s.bind_data("K", Tensor::scalar(3));
  s.add_parameter({"cap", {std::string("K")}, ""});
  s.bind_data("cap", Tensor{{3}, {3, 4, 5}});
  s.add_variable({"b", {std::string("K")}, "", VarType::kBinary, std::nullopt});
  s.add_variable({"y", {std::string("K")}, "", VarType::kContinuous, Bounds{0, 10}});
  s.add_variable({"w", {std::string("K")}, "", VarType::kContinuous, Bounds{1, 5}});
  for (int i = 1; i <= 4; ++i) {
    Clause c;
    c.id = "c" + std::to_string(i);
    c.kind = i == 1 ? ClauseKind::kObjective : ClauseKind::kConstraint;
    c.status = ClauseStatus::kFormulated;
    s.add_clause(c);
    s.connect(c.id, "y");
  }
  return s;
}

static const std::vector<std::pair<ir::AnnotationKind, std::string>> kValid = {
    {ir::AnnotationKind::kIndicator, "b_k = 0 -> y_k <= 0 forall k in K"},
    {ir::AnnotationKind::kIndicator, "y_k <= cap_k forall k in K; b_k = 1 -> y_k >= 1 forall k in K"},
    {ir::AnnotationKind::kSOS1, "sos1(y_k over k in K)"},
    {ir::AnnotationKind::kSOS2, "sos2(y_k over k in K)"},
    {ir::AnnotationKind::kSOS1, "sos1(y_0, y_2)"},
};

std::vector<StructureProposal> invalid_proposals(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::vector<std::string> constraints = {"c2", "c3", "c4"};
  const std::vector<std::string> garbage = {"b_k = -> y_k", "sos1(y_k over)", "y_k <= <= 1", "sos3(y_k over k in K)",
                                            "y_k y_k <= 1 forall k in K", "q_k <= 1 forall k in K", ""};
  std::vector<StructureProposal> out;
  for (int i = 0; i < count; ++i) {
    auto [kind, annotation] = kValid[pick(kValid.size())];
    StructureProposal p{kind, {constraints[pick(3)]}, annotation, 5};
    switch (i % 10) {
      case 0: p.targets.push_back("c" + std::to_string(5 + pick(50))); break;
      case 1: p.targets.push_back(p.targets[0]); break;
      case 2: p.targets.insert(p.targets.begin() + pick(2), "c1"); break;
      case 3:
        p.kind = kind == ir::AnnotationKind::kIndicator ? ir::AnnotationKind::kSOS1 : ir::AnnotationKind::kIndicator;
        break;
      case 4: p.annotation = garbage[pick(garbage.size())]; break;
      case 5: p.annotation += "; minimize sum_{k in K} y_k"; break;
      case 6: p.annotation = "y_k <= cap_k forall k in K"; break;
      case 7:
        p.kind = pick(2) ? ir::AnnotationKind::kSOS1 : ir::AnnotationKind::kSOS2;
        p.annotation = p.kind == ir::AnnotationKind::kSOS1 ? "sos1(w_k over k in K)" : "sos2(w_0, y_1, w_2)";
        break;
      case 8: p.targets.clear(); break;
      case 9:
        p.kind = ir::AnnotationKind::kIndicator;
        p.annotation = "b_k = 1 -> y_{k+1} <= 0 forall k in K";
        break;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<StructureProposal> valid_proposals() {
  std::vector<StructureProposal> out;
  for (const auto& [kind, annotation] : kValid) out.push_back({kind, {"c2", "c3"}, annotation, 5});
  return out;
}

}  // namespace oracle
