#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nlmilp/model.hpp"

namespace nlmilp {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kError, kTimeLimit };

std::string_view to_string(SolveStatus status);

struct Tolerances {
  double feasibility = 1e-6;
  double integrality = 1e-5;
  double objective = 1e-6;  // relative
};

struct SolverParams {
  double time_limit = 60.0;  // seconds
  double mip_gap = 1e-9;     // relative
  bool presolve = true;
  long iteration_limit = 1000000;
  long node_limit = 1000000;
  Tolerances tolerances;
};

struct SolveStats {
  long iterations = 0;
  long nodes = 0;
  double wall_seconds = 0.0;
  std::optional<double> best_bound;
  std::optional<double> gap;
};

struct Solution {
  SolveStatus status = SolveStatus::kError;
  std::optional<double> objective;  // present iff Optimal
  std::vector<double> primal;       // by column index; size = num_cols when Optimal
  std::vector<std::string> names;   // column names, aligned with primal
  // Row duals and column reduced costs. Continuous solves only.
  std::optional<std::vector<double>> duals;
  std::optional<std::vector<double>> reduced_costs;
  SolveStats stats;
  std::string message;
  std::string engine;
  std::vector<LoweringRecord> lowering;

  std::map<std::string, double> primal_by_name() const;
};

// Dual objective b'y plus bound terms of the reduced costs; equals the primal
// objective at an optimal basis. Throws kMissingDuals.
double dual_objective(const GroundModel& model, const Solution& solution);

// Largest violation of dual feasibility (row dual signs, reduced cost signs
// against finite bounds), in the model's own sense.
double dual_infeasibility(const GroundModel& model, const Solution& solution);

struct EngineCapabilities {
  bool integer = true;
  bool sos = false;
  bool indicators = false;
  bool semicontinuous = false;
  bool duals = false;
};

class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::string id() const = 0;
  virtual EngineCapabilities capabilities() const = 0;
  // Solves a model whose annotations are all natively supported.
  virtual Solution solve_native(const GroundModel& model, const SolverParams& params) const = 0;
};

// In-process bounded-variable simplex with branch and bound. Handles SOS1/2,
// indicators and semi-continuous columns by branching.
std::unique_ptr<Engine> make_simplex_engine();

// Writes the model as an LP file and runs an external command
// `<command> <model.lp> <solution.txt>`; see tools/highs_solve.py for the
// solution file format.
std::unique_ptr<Engine> make_subprocess_engine(std::string id, std::string command);

// "simplex" or "highs" (subprocess via python highspy). Throws
// kEngineUnavailable for unknown ids.
std::unique_ptr<Engine> make_engine(const std::string& id);

// Lowers what the engine cannot take natively, solves, and maps the primal
// back onto the original columns. Piecewise-linear constraints are always
// lowered.
Solution solve(const GroundModel& model, const SolverParams& params, const Engine& engine);
Solution solve(const GroundModel& model, const SolverParams& params = {});

// LP relaxation: integrality and annotations dropped. Used by sifting.
GroundModel relax(const GroundModel& model);

// LP-format text (CPLEX-style subset). Deterministic; parse_lp(write_lp(m))
// reproduces m. Throws kUnrepresentableAnnotation for piecewise-linear
// constraints.
std::string write_lp(const GroundModel& model);
GroundModel parse_lp(const std::string& text);
GroundModel read_lp_file(const std::string& path);

}  // namespace nlmilp
