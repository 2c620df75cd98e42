#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nlmilp/state.hpp"

namespace nlmilp {

enum class Sense { kMinimize, kMaximize };
enum class Relation { kLessEqual, kEqual, kGreaterEqual };

std::string_view to_string(Relation rel);
std::string_view to_string(Sense sense);

inline constexpr double kDefaultBigM = 1e6;

// Shortest decimal text that parses back to exactly `v`; "inf" / "-inf" for
// infinities.
std::string format_number(double v);

struct Row {
  std::string name;
  std::vector<int> cols;
  std::vector<double> vals;
  Relation sense = Relation::kLessEqual;
  double rhs = 0.0;
  bool operator==(const Row&) const = default;
};

struct SosSet {
  std::string name;
  int type = 1;  // 1 or 2
  std::vector<int> cols;
  std::vector<double> weights;
  bool operator==(const SosSet&) const = default;
};

// trigger == trigger_value  =>  sum(vals * x[cols]) sense rhs
struct IndicatorRow {
  std::string name;
  int trigger = -1;
  int trigger_value = 1;
  std::vector<int> cols;
  std::vector<double> vals;
  Relation sense = Relation::kLessEqual;
  double rhs = 0.0;
  double big_m = kDefaultBigM;  // used only when lowered
  bool operator==(const IndicatorRow&) const = default;
};

// x == 0  or  lower <= x <= upper. The column itself carries bounds [0, upper].
struct SemiContinuous {
  int col = -1;
  double lower = 0.0;
  double upper = 0.0;
  bool operator==(const SemiContinuous&) const = default;
};

// y == f(x) with f linear between consecutive breakpoints.
struct PiecewiseLinear {
  std::string name;
  int x = -1;
  int y = -1;
  std::vector<std::pair<double, double>> points;
  bool operator==(const PiecewiseLinear&) const = default;
};

// Fully numeric MILP:  opt c'x + offset  s.t.  rows,  lb <= x <= ub,
// integrality, and grounded structure annotations.
struct GroundModel {
  std::string name;
  Sense sense = Sense::kMinimize;
  double objective_offset = 0.0;
  std::vector<double> objective;
  std::vector<std::string> col_names;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> integer;
  std::vector<Row> rows;
  std::vector<SosSet> sos;
  std::vector<IndicatorRow> indicators;
  std::vector<SemiContinuous> semicontinuous;
  std::vector<PiecewiseLinear> piecewise;

  int num_cols() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }
  bool has_annotations() const {
    return !sos.empty() || !indicators.empty() || !semicontinuous.empty() || !piecewise.empty();
  }
  bool is_continuous() const;

  int add_column(std::string name, double cost, double lb, double ub, bool is_integer);
  void add_row(Row row) { rows.push_back(std::move(row)); }
  int find_column(const std::string& name) const;

  // Throws kInvalidArgument on dimension or annotation inconsistencies.
  void check() const;

  bool operator==(const GroundModel&) const = default;
};

double objective_value(const GroundModel& model, const std::vector<double>& x);
double row_activity(const Row& row, const std::vector<double>& x);

struct FeasibilityReport {
  bool feasible = true;
  double max_violation = 0.0;
  std::string worst;  // name of the most violated item
};

FeasibilityReport check_feasibility(const GroundModel& model, const std::vector<double>& x,
                                    double feasibility_tol = 1e-6, double integrality_tol = 1e-5);

struct LoweringRecord {
  std::string annotation;
  std::string method;
};

struct LoweringOptions {
  bool indicators = true;
  bool sos = true;
  bool semicontinuous = true;
  bool piecewise = true;
};

// Replaces annotations by auxiliary binaries and linear rows:
//   indicator -> big-M rows, SOS1/SOS2 -> binary linking, semi-continuous ->
//   on/off binary, piecewise-linear -> lambda weights in an SOS2 (lowered
//   further when `sos` is set).
GroundModel lower_annotations(const GroundModel& model, const LoweringOptions& options,
                              std::vector<LoweringRecord>* records = nullptr);

struct Diagnostic {
  enum class Severity { kWarning, kError } severity = Severity::kWarning;
  std::string code;
  std::string message;
};

std::vector<Diagnostic> validate(const GroundModel& model);

}  // namespace nlmilp
