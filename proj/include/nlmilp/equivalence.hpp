#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlmilp/model.hpp"

namespace nlmilp::equiv {

// Coefficient-labeled bipartite graph of a formulation. Labels are text
// tokens compared by equality: shortest round-trip decimals for numbers.
struct FormulationGraph {
  std::vector<std::string> var_names;
  std::vector<std::string> var_labels;  // objective coefficient, type, bounds
  std::vector<std::string> con_names;
  std::vector<std::string> con_labels;  // relation and rhs
  // Per constraint: (variable, coefficient label), ascending variable.
  std::vector<std::vector<std::pair<int, std::string>>> con_edges;
  std::string sense;

  int num_vars() const { return static_cast<int>(var_names.size()); }
  int num_cons() const { return static_cast<int>(con_names.size()); }
  std::size_t num_edges() const;
};

struct GraphOptions {
  // Round coefficients to this many significant digits before labeling.
  // Unset = exact.
  std::optional<int> significant_digits;
};

// Rows `a x >= b` become `-a x <= -b`; zero coefficients make no edge.
// Annotations are not part of the graph.
FormulationGraph to_graph(const GroundModel& model, const GraphOptions& options = {});

struct Correspondence {
  std::vector<int> variables;    // g1 variable i -> g2 variable
  std::vector<int> constraints;  // g1 constraint i -> g2 constraint
};

struct EquivalenceResult {
  bool equivalent = false;
  Correspondence correspondence;  // when equivalent
  std::string witness;            // when not
  long nodes = 0;                 // search nodes expanded
};

struct SearchOptions {
  long node_budget = 10000000;
};

// Throws kSearchBudgetExceeded when the budget runs out before a verdict.
EquivalenceResult check_equivalence(const FormulationGraph& g1, const FormulationGraph& g2,
                                    const SearchOptions& options = {});

// Full re-check of a correspondence; empty string when it holds, else the
// first mismatch.
std::string verify_correspondence(const FormulationGraph& g1, const FormulationGraph& g2, const Correspondence& c);

nlohmann::json result_to_json(const FormulationGraph& g1, const FormulationGraph& g2, const EquivalenceResult& r);

struct SimpleGraph {
  int vertices = 0;
  std::vector<std::pair<int, int>> edges;
};

// One variable per vertex, x_u + x_v = 1 per edge, zero objective.
GroundModel graph_to_formulation(const SimpleGraph& graph);

}  // namespace nlmilp::equiv
