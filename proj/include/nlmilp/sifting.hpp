#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlmilp/model.hpp"
#include "nlmilp/solver.hpp"

namespace nlmilp::sift {

// min c'x + offset  s.t.  Ax = b,  0 <= x <= upper.  A stored by column.
struct StandardForm {
  int rows = 0;
  std::vector<double> c;
  std::vector<std::vector<std::pair<int, double>>> columns;
  std::vector<double> b;
  std::vector<double> upper;  // empty = all +inf
  std::vector<std::string> names;
  double offset = 0.0;

  int num_cols() const { return static_cast<int>(c.size()); }
  double upper_of(int j) const { return upper.empty() ? kInfinity : upper[j]; }
  void check() const;  // kInvalidShape
};

// How a StandardForm column maps back to a column of the source model:
// x_src = shift + sign * x_std (two std columns per free source column).
struct ColumnMap {
  int source = -1;
  double sign = 1.0;
  double shift = 0.0;
};

struct StandardFormConversion {
  StandardForm form;
  std::vector<ColumnMap> map;  // per std column; slacks have source -1
  int source_cols = 0;
  double sense_sign = 1.0;  // -1 when the source maximizes

  std::vector<double> to_source(const std::vector<double>& x) const;
};

// LP relaxation of `model` in standard form: slacks for inequalities,
// shifts for finite lower bounds, splits for free columns.
StandardFormConversion to_standard_form(const GroundModel& model);

GroundModel to_ground(const StandardForm& form);

struct SiftConfig {
  std::optional<int> init_k;                 // random selection size; unset = automatic
  std::uint64_t seed = 1;
  std::vector<int> initial;                  // provided selection; wins over init_k
  double epsilon = 1e-7;                     // pricing / violation tolerance
  int max_iterations = 1000;
  int batch_cap = 0;                         // 0 = unlimited
  std::optional<double> gap_stop;            // relative gap, only when both bounds exist
  std::optional<double> incumbent;           // known full-problem objective (row sifting upper bound)
  bool phase1_fallback = true;               // column sifting only
  SolverParams solver;
};

void check_config(const SiftConfig& config);  // kInvalidArgument

struct IterationRecord {
  int iteration = 0;
  int active = 0;       // |S|
  double objective = 0.0;
  int added = 0;        // priced or violated count this iteration
  double seconds = 0.0;
  std::string note;
};

struct SiftResult {
  Solution solution;  // over the full problem
  std::vector<IterationRecord> history;
  std::vector<int> active;  // final S, ascending
  std::string stop;         // "priced-out", "no-violation", "gap", "infeasible", "unbounded"
  std::optional<double> gap;
};

std::string history_csv(const std::vector<IterationRecord>& history);

// Reduced costs c_j - A_j'y for every column.
std::vector<double> reduced_costs(const StandardForm& form, const std::vector<double>& y);

// Columns outside `active` with reduced cost below -epsilon, most negative
// first. Throws kMissingDuals when y is empty but rows exist.
std::vector<int> price_columns(const StandardForm& form, const std::vector<int>& active,
                               const std::vector<double>& y, double epsilon = 1e-7);

// Primal column sifting. The engine must report duals (kEngineUnavailable
// otherwise). Throws kRestrictedInfeasible when the restricted problem stays
// infeasible and phase1_fallback is off, kIterationLimit.
SiftResult sift_columns(const StandardForm& form, const SiftConfig& config, const Engine& engine);
SiftResult sift_columns(const StandardForm& form, const SiftConfig& config = {});

// Row sifting on the LP relaxation of `model`.
SiftResult sift_constraints(const GroundModel& model, const SiftConfig& config, const Engine& engine);
SiftResult sift_constraints(const GroundModel& model, const SiftConfig& config = {});

}  // namespace nlmilp::sift
