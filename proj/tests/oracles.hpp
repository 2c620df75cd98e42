#pragma once

// Generators and independent checkers shared by the unit tests and the
// acceptance binary. Nothing here calls into the code it is used to check.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlmilp/model.hpp"
#include "nlmilp/sifting.hpp"
#include "nlmilp/state.hpp"
#include "nlmilp/structure.hpp"

namespace oracle {

// Feasible bounded standard-form LP: b = A x0 with x0 >= 0, c > 0.
nlmilp::sift::StandardForm random_standard_lp(int m, int n, std::uint64_t seed);

// Dense c - A'y, written without the sparse column layout.
std::vector<double> dense_reduced_costs(const nlmilp::sift::StandardForm& form, const std::vector<double>& y);

// Covering LP: min c'x, A x >= 1, 0 <= x <= 1, A in {0,1}.
nlmilp::GroundModel random_covering_lp(int m, int n, std::uint64_t seed);

// Bounded model with integer columns, SOS sets and indicators for LP
// round-trip checks.
nlmilp::GroundModel random_annotated_model(std::uint64_t seed);

// Random continuous LP with finite bounds (always feasible: the origin
// shifted into the box satisfies every row).
nlmilp::GroundModel random_bounded_lp(int m, int n, std::uint64_t seed);

// Valid state with parameters, variables, clauses and edges.
nlmilp::State random_state(std::uint64_t seed);

// Exhaustive check of strict formulation equivalence: every pair of
// variable / constraint permutations; `>=` rows flipped first. Returns the
// variable permutation when one exists.
std::optional<std::pair<std::vector<int>, std::vector<int>>> brute_force_equivalent(const nlmilp::GroundModel& a,
                                                                                     const nlmilp::GroundModel& b);

using SimpleGraph = std::pair<int, std::vector<std::pair<int, int>>>;  // vertices, edges

SimpleGraph random_graph(int max_vertices, std::uint64_t seed);
bool brute_force_isomorphic(const SimpleGraph& a, const SimpleGraph& b);

struct EquivCase {
  std::string kind;  // twin, perturbed, random, graph
  nlmilp::GroundModel a, b;
  std::optional<std::pair<SimpleGraph, SimpleGraph>> graphs;
};

// Formulations with <= 6 variables and <= 6 constraints (permuted twins,
// perturbed twins, unrelated pairs) plus reductions of graph pairs with
// <= 8 vertices.
std::vector<EquivCase> equivalence_corpus(std::uint64_t seed, int count = 200);

// Shuffled copy: columns and rows permuted, some <= rows written as >=.
nlmilp::GroundModel permuted(const nlmilp::GroundModel& g, std::uint64_t seed);

// Random edits through the public State API (removals, kind swaps,
// disconnections); the result must still validate.
void mutate_state(nlmilp::State& s, std::uint64_t seed);

// b binary, y in [0, 10], w in [1, 5] over K = 3; c1 objective, c2..c4
// formulated constraints.
nlmilp::State structure_toy_state();
// Proposals that pass every check on structure_toy_state().
std::vector<nlmilp::structure::StructureProposal> valid_proposals();
// Proposals that each break one invariant (unknown or duplicate target,
// objective target, wrong kind, unparseable, objective inside, no
// annotation, SOS members forced nonzero, no target, index out of range).
std::vector<nlmilp::structure::StructureProposal> invalid_proposals(std::uint64_t seed, int count);

}  // namespace oracle
