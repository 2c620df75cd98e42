#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace nlmilp {

inline constexpr int kStateSchemaVersion = 1;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// A shape entry is either a named dimension ("K") or a literal extent.
using Dim = std::variant<std::string, std::int64_t>;
using Shape = std::vector<Dim>;

std::string dim_to_string(const Dim& dim);

struct Tensor {
  std::vector<std::int64_t> shape;  // empty = scalar
  std::vector<double> values;       // row-major

  static Tensor scalar(double v) { return Tensor{{}, {v}}; }
  std::size_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

enum class VarType { kContinuous, kInteger, kBinary };

std::string_view to_string(VarType type);
VarType var_type_from_string(std::string_view text);

struct Bounds {
  double lower = 0.0;
  double upper = kInfinity;
  bool operator==(const Bounds&) const = default;
};

struct Parameter {
  std::string symbol;
  Shape shape;
  std::string definition;
  bool operator==(const Parameter&) const = default;
};

struct Variable {
  std::string symbol;
  Shape shape;
  std::string definition;
  VarType type = VarType::kContinuous;
  std::optional<Bounds> bounds;  // applies to every element; default [0, inf)

  Bounds effective_bounds() const;
  bool operator==(const Variable&) const = default;
};

enum class ClauseKind { kConstraint, kObjective };
enum class ClauseStatus { kExtracted = 0, kFormulated = 1, kCoded = 2 };

std::string_view to_string(ClauseKind kind);
std::string_view to_string(ClauseStatus status);

struct Clause {
  std::string id;
  ClauseKind kind = ClauseKind::kConstraint;
  std::string description;
  std::string formulation;
  std::optional<std::string> fragment;  // IR source in the markup grammar
  ClauseStatus status = ClauseStatus::kExtracted;
  std::optional<int> confidence;
  bool low_confidence = false;
  bool operator==(const Clause&) const = default;
};

using Edge = std::pair<std::string, std::string>;  // (clause id, symbol)

// Bipartite clause/symbol graph. Edges keep insertion order.
class ConnectionGraph {
 public:
  bool add(const std::string& clause_id, const std::string& symbol);
  bool contains(const std::string& clause_id, const std::string& symbol) const;
  void remove_clause(std::string clause_id);
  void remove_symbol(std::string symbol);
  std::vector<std::string> neighbors_of_clause(const std::string& clause_id) const;
  std::vector<std::string> clauses_of_symbol(const std::string& symbol) const;

  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  bool operator==(const ConnectionGraph& other) const { return edges_ == other.edges_; }

 private:
  std::vector<Edge> edges_;
};

struct ClauseContext {
  std::vector<Parameter> parameters;
  std::vector<Variable> variables;
};

enum class SymbolKind { kNone, kParameter, kVariable };

class State {
 public:
  State() = default;
  explicit State(std::string background) : background_(std::move(background)) {}

  const std::string& background() const { return background_; }
  void set_background(std::string text) { background_ = std::move(text); }
  const std::string& description() const { return description_; }
  void set_description(std::string text) { description_ = std::move(text); }

  const std::vector<Parameter>& parameters() const { return parameters_; }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Clause>& clauses() const { return clauses_; }
  const ConnectionGraph& graph() const { return graph_; }
  const std::map<std::string, Tensor>& data() const { return data_; }

  void add_parameter(Parameter parameter);
  void add_variable(Variable variable);
  void add_clause(Clause clause);

  SymbolKind symbol_kind(const std::string& symbol) const;
  bool has_symbol(const std::string& symbol) const { return symbol_kind(symbol) != SymbolKind::kNone; }
  const Parameter* find_parameter(const std::string& symbol) const;
  const Variable* find_variable(const std::string& symbol) const;
  Variable* find_variable(const std::string& symbol);
  const Clause* find_clause(const std::string& id) const;
  Clause* find_clause(const std::string& id);
  const Clause& clause(const std::string& id) const;
  Clause& clause(const std::string& id);

  // Edges are (clause, symbol); both endpoints must already exist.
  void connect(const std::string& clause_id, const std::string& symbol);
  void disconnect_clause(std::string clause_id);

  // Keys by value: callers often pass a name stored in the item being removed.
  void remove_clause(std::string clause_id);
  void remove_symbol(std::string symbol);

  // Moves a parameter into the variable table (or back), keeping its edges.
  void parameter_to_variable(std::string symbol, VarType type);
  void variable_to_parameter(std::string symbol);

  void bind_data(const std::string& symbol, Tensor tensor);
  const Tensor* find_data(const std::string& symbol) const;
  void clear_data(const std::string& symbol) { data_.erase(symbol); }

  // Named dimension extent: a scalar parameter of the same name, else the
  // extent of any bound tensor that uses the name on some axis.
  std::optional<std::int64_t> resolve_dim(const std::string& name) const;
  std::optional<std::vector<std::int64_t>> resolve_shape(const Shape& shape) const;

  ClauseContext context_for(const std::string& clause_id) const;

  std::string next_clause_id() const;

  // Full scan of every invariant; throws Error(kSchemaViolation) naming the
  // first violation found.
  void validate() const;

  bool operator==(const State&) const = default;

 private:
  void check_new_symbol(const std::string& symbol, const Shape& shape) const;

  std::string background_;
  std::string description_;
  std::vector<Parameter> parameters_;
  std::vector<Variable> variables_;
  std::vector<Clause> clauses_;
  ConnectionGraph graph_;
  std::map<std::string, Tensor> data_;
};

State new_state(std::string background);

nlohmann::json shape_to_json(const Shape& shape);
Shape shape_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json tensor_to_json(const Tensor& tensor);
Tensor tensor_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json parameter_to_json(const Parameter& p);
nlohmann::json variable_to_json(const Variable& v);
nlohmann::json clause_to_json(const Clause& c);
Parameter parameter_from_json(const nlohmann::json& j, const std::string& path);
Variable variable_from_json(const nlohmann::json& j, const std::string& path);
Clause clause_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json state_to_json(const State& state);
State state_from_json(const nlohmann::json& j);

void save_state(const State& state, const std::filesystem::path& path);
State load_state(const std::filesystem::path& path);

}  // namespace nlmilp
