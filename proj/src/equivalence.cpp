#include "nlmilp/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "nlmilp/error.hpp"

namespace nlmilp::equiv {

std::size_t FormulationGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& e : con_edges) n += e.size();
  return n;
}

namespace {

std::string token(double v, const GraphOptions& options) {
  if (v == 0.0) v = 0.0;  // -0
  if (!options.significant_digits || !std::isfinite(v)) return format_number(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", *options.significant_digits, v);
  return format_number(std::strtod(buf, nullptr));
}

}  // namespace

FormulationGraph to_graph(const GroundModel& model, const GraphOptions& options) {
  FormulationGraph g;
  g.sense = std::string(to_string(model.sense));
  for (int j = 0; j < model.num_cols(); ++j) {
    g.var_names.push_back(model.col_names[j]);
    g.var_labels.push_back("c=" + token(model.objective[j], options) + (model.integer[j] ? " int" : " cont") + " [" +
                           token(model.lower[j], options) + "," + token(model.upper[j], options) + "]");
  }
  for (int i = 0; i < model.num_rows(); ++i) {
    const Row& r = model.rows[i];
    double flip = r.sense == Relation::kGreaterEqual ? -1.0 : 1.0;
    Relation rel = r.sense == Relation::kGreaterEqual ? Relation::kLessEqual : r.sense;
    std::map<int, double> coef;
    for (std::size_t k = 0; k < r.cols.size(); ++k) coef[r.cols[k]] += flip * r.vals[k];
    std::vector<std::pair<int, std::string>> edges;
    for (const auto& [j, a] : coef) {
      if (a != 0.0) edges.emplace_back(j, token(a, options));
    }
    g.con_names.push_back(r.name.empty() ? "r" + std::to_string(i) : r.name);
    g.con_labels.push_back(std::string(to_string(rel)) + " " + token(flip * r.rhs, options));
    g.con_edges.push_back(std::move(edges));
  }
  return g;
}

std::string verify_correspondence(const FormulationGraph& g1, const FormulationGraph& g2, const Correspondence& c) {
  if (g1.sense != g2.sense) return "objective sense differs";
  if (g1.num_vars() != g2.num_vars() || g1.num_cons() != g2.num_cons()) return "node counts differ";
  if (static_cast<int>(c.variables.size()) != g1.num_vars() || static_cast<int>(c.constraints.size()) != g1.num_cons()) {
    return "correspondence is not total";
  }
  std::vector<char> seen_v(g2.num_vars(), 0), seen_c(g2.num_cons(), 0);
  for (int v : c.variables) {
    if (v < 0 || v >= g2.num_vars() || seen_v[v]++) return "variable map is not a bijection";
  }
  for (int k : c.constraints) {
    if (k < 0 || k >= g2.num_cons() || seen_c[k]++) return "constraint map is not a bijection";
  }
  for (int j = 0; j < g1.num_vars(); ++j) {
    if (g1.var_labels[j] != g2.var_labels[c.variables[j]]) return "variable " + g1.var_names[j] + " label differs";
  }
  for (int i = 0; i < g1.num_cons(); ++i) {
    int k = c.constraints[i];
    if (g1.con_labels[i] != g2.con_labels[k]) return "constraint " + g1.con_names[i] + " relation or rhs differs";
    std::vector<std::pair<int, std::string>> mapped;
    for (const auto& [j, lab] : g1.con_edges[i]) mapped.emplace_back(c.variables[j], lab);
    std::sort(mapped.begin(), mapped.end());
    if (mapped != g2.con_edges[k]) return "constraint " + g1.con_names[i] + " coefficients differ";
  }
  return "";
}

namespace {

// Colors live in one table shared by both graphs so classes compare.
struct Joint {
  const FormulationGraph* g[2];
  int n[2];      // vars + cons per graph
  std::vector<std::vector<std::pair<int, int>>> adj[2];  // node -> (label id, neighbor node)
};

using Colors = std::vector<int>;

Joint make_joint(const FormulationGraph& a, const FormulationGraph& b, Colors out[2]) {
  Joint J;
  J.g[0] = &a;
  J.g[1] = &b;
  std::map<std::string, int> labels, node_labels;
  for (int s = 0; s < 2; ++s) {
    const FormulationGraph& g = *J.g[s];
    int nv = g.num_vars();
    J.n[s] = nv + g.num_cons();
    J.adj[s].assign(J.n[s], {});
    out[s].assign(J.n[s], 0);
    for (int j = 0; j < nv; ++j) {
      out[s][j] = node_labels.emplace("v:" + g.var_labels[j], node_labels.size()).first->second;
    }
    for (int i = 0; i < g.num_cons(); ++i) {
      out[s][nv + i] = node_labels.emplace("c:" + g.con_labels[i], node_labels.size()).first->second;
      for (const auto& [j, lab] : g.con_edges[i]) {
        int l = labels.emplace(lab, labels.size()).first->second;
        J.adj[s][nv + i].emplace_back(l, j);
        J.adj[s][j].emplace_back(l, nv + i);
      }
    }
  }
  return J;
}

std::map<int, int> histogram(const Colors& c) {
  std::map<int, int> h;
  for (int x : c) ++h[x];
  return h;
}

// Color refinement to a stable partition on both graphs at once. Returns
// false when the class histograms diverge.
bool refine(const Joint& J, Colors c[2]) {
  std::size_t classes = 0;
  for (;;) {
    std::map<std::pair<int, std::vector<std::pair<int, int>>>, int> table;
    Colors next[2];
    for (int s = 0; s < 2; ++s) {
      next[s].resize(J.n[s]);
      for (int u = 0; u < J.n[s]; ++u) {
        std::vector<std::pair<int, int>> sig;
        sig.reserve(J.adj[s][u].size());
        for (const auto& [l, w] : J.adj[s][u]) sig.emplace_back(l, c[s][w]);
        std::sort(sig.begin(), sig.end());
        next[s][u] = table.emplace(std::make_pair(c[s][u], std::move(sig)), table.size()).first->second;
      }
    }
    if (histogram(next[0]) != histogram(next[1])) return false;
    c[0] = std::move(next[0]);
    c[1] = std::move(next[1]);
    if (table.size() == classes) return true;
    classes = table.size();
  }
}

struct Search {
  const Joint& J;
  long budget;
  long nodes = 0;
  std::optional<Correspondence> found;

  bool run(Colors c[2]) {
    if (++nodes > budget) {
      throw Error(ErrorCode::kSearchBudgetExceeded,
                  "equivalence search stopped after " + std::to_string(budget) + " nodes");
    }
    if (!refine(J, c)) return false;
    const int nv = J.g[0]->num_vars();
    // Smallest non-singleton variable class in graph 0.
    std::map<int, int> h = histogram(Colors(c[0].begin(), c[0].begin() + nv));
    int pick = -1, best = 0;
    for (int j = 0; j < nv; ++j) {
      int size = h[c[0][j]];
      if (size > 1 && (pick < 0 || size < best)) {
        pick = j;
        best = size;
      }
    }
    if (pick < 0) return leaf(c);
    int fresh = 1 + std::max(*std::max_element(c[0].begin(), c[0].end()), *std::max_element(c[1].begin(), c[1].end()));
    for (int w = 0; w < nv; ++w) {
      if (c[1][w] != c[0][pick]) continue;
      Colors child[2] = {c[0], c[1]};
      child[0][pick] = fresh;
      child[1][w] = fresh;
      if (run(child)) return true;
    }
    return false;
  }

  bool leaf(const Colors c[2]) {
    const FormulationGraph& a = *J.g[0];
    const FormulationGraph& b = *J.g[1];
    const int nv = a.num_vars();
    Correspondence corr;
    std::map<int, std::vector<int>> by_color;
    for (int w = 0; w < nv; ++w) by_color[c[1][w]].push_back(w);
    for (int j = 0; j < nv; ++j) corr.variables.push_back(by_color[c[0][j]].front());
    std::map<int, std::vector<int>> con_by_color;
    for (int k = b.num_cons() - 1; k >= 0; --k) con_by_color[c[1][nv + k]].push_back(k);
    for (int i = 0; i < a.num_cons(); ++i) {
      auto& pool = con_by_color[c[0][nv + i]];
      if (pool.empty()) return false;
      corr.constraints.push_back(pool.back());
      pool.pop_back();
    }
    if (!verify_correspondence(a, b, corr).empty()) return false;
    found = std::move(corr);
    return true;
  }
};

template <typename F>
std::string multiset_mismatch(const FormulationGraph& a, const FormulationGraph& b, const std::string& what, F key) {
  std::multiset<std::string> x, y;
  key(a, x);
  key(b, y);
  if (x == y) return "";
  return what + " differ (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) + " entries)";
}

}  // namespace

EquivalenceResult check_equivalence(const FormulationGraph& g1, const FormulationGraph& g2,
                                    const SearchOptions& options) {
  EquivalenceResult r;
  auto no = [&](std::string why) {
    r.equivalent = false;
    r.witness = std::move(why);
    return r;
  };
  if (g1.sense != g2.sense) return no("objective sense " + g1.sense + " vs " + g2.sense);
  if (g1.num_vars() != g2.num_vars()) {
    return no("variable count " + std::to_string(g1.num_vars()) + " vs " + std::to_string(g2.num_vars()));
  }
  if (g1.num_cons() != g2.num_cons()) {
    return no("constraint count " + std::to_string(g1.num_cons()) + " vs " + std::to_string(g2.num_cons()));
  }
  if (g1.num_edges() != g2.num_edges()) {
    return no("edge count " + std::to_string(g1.num_edges()) + " vs " + std::to_string(g2.num_edges()));
  }
  std::string m = multiset_mismatch(g1, g2, "variable labels", [](const FormulationGraph& g, auto& s) {
    for (const auto& l : g.var_labels) s.insert(l);
  });
  if (!m.empty()) return no(m);
  m = multiset_mismatch(g1, g2, "constraint relation/rhs labels", [](const FormulationGraph& g, auto& s) {
    for (const auto& l : g.con_labels) s.insert(l);
  });
  if (!m.empty()) return no(m);
  m = multiset_mismatch(g1, g2, "coefficient labels", [](const FormulationGraph& g, auto& s) {
    for (const auto& e : g.con_edges) {
      for (const auto& p : e) s.insert(p.second);
    }
  });
  if (!m.empty()) return no(m);
  // (degree, sorted incident labels, relation, rhs) per constraint.
  m = multiset_mismatch(g1, g2, "constraint signatures", [](const FormulationGraph& g, auto& s) {
    for (int i = 0; i < g.num_cons(); ++i) {
      std::vector<std::string> labs;
      for (const auto& p : g.con_edges[i]) labs.push_back(p.second);
      std::sort(labs.begin(), labs.end());
      std::string sig = g.con_labels[i] + "|" + std::to_string(labs.size());
      for (const auto& l : labs) sig += "|" + l;
      s.insert(sig);
    }
  });
  if (!m.empty()) return no(m);

  Colors c[2];
  Joint J = make_joint(g1, g2, c);
  Search search{J, options.node_budget, 0, std::nullopt};
  bool ok = search.run(c);
  r.nodes = search.nodes;
  if (!ok) {
    return no(search.nodes == 1 ? "refined color classes differ" : "search exhausted after " +
                                                                          std::to_string(search.nodes) + " nodes");
  }
  r.equivalent = true;
  r.correspondence = *search.found;
  return r;
}

nlohmann::json result_to_json(const FormulationGraph& g1, const FormulationGraph& g2, const EquivalenceResult& r) {
  nlohmann::json j = {{"equivalent", r.equivalent}, {"nodes", r.nodes}};
  if (!r.equivalent) {
    j["witness"] = r.witness;
    return j;
  }
  nlohmann::json vars = nlohmann::json::object(), cons = nlohmann::json::object();
  for (std::size_t i = 0; i < r.correspondence.variables.size(); ++i) {
    vars[g1.var_names[i]] = g2.var_names[r.correspondence.variables[i]];
  }
  for (std::size_t i = 0; i < r.correspondence.constraints.size(); ++i) {
    cons[g1.con_names[i]] = g2.con_names[r.correspondence.constraints[i]];
  }
  j["variables"] = vars;
  j["constraints"] = cons;
  return j;
}

GroundModel graph_to_formulation(const SimpleGraph& graph) {
  GroundModel m;
  m.name = "graph";
  for (int v = 0; v < graph.vertices; ++v) m.add_column("x" + std::to_string(v), 0.0, 0.0, kInfinity, false);
  int k = 0;
  for (const auto& [u, v] : graph.edges) {
    if (u < 0 || v < 0 || u >= graph.vertices || v >= graph.vertices || u == v) {
      throw Error(ErrorCode::kInvalidArgument, "graph is not simple: edge (" + std::to_string(u) + "," +
                                                   std::to_string(v) + ")");
    }
    Row r;
    r.name = "e" + std::to_string(k++);
    r.cols = {u, v};
    r.vals = {1.0, 1.0};
    r.sense = Relation::kEqual;
    r.rhs = 1.0;
    m.add_row(std::move(r));
  }
  return m;
}

}  // namespace nlmilp::equiv
