#include "nlmilp/state.hpp"

#include <algorithm>
#include <functional>
#include <cmath>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"

namespace nlmilp {

using nlohmann::json;
namespace ju = json_util;

std::string dim_to_string(const Dim& dim) {
  if (const auto* name = std::get_if<std::string>(&dim)) return *name;
  return std::to_string(std::get<std::int64_t>(dim));
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string_view to_string(VarType type) {
  switch (type) {
    case VarType::kContinuous: return "Continuous";
    case VarType::kInteger: return "Integer";
    case VarType::kBinary: return "Binary";
  }
  return "Continuous";
}

VarType var_type_from_string(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (lower == "continuous") return VarType::kContinuous;
  if (lower == "integer") return VarType::kInteger;
  if (lower == "binary") return VarType::kBinary;
  throw Error(ErrorCode::kInvalidArgument, "unknown variable type '" + std::string(text) + "'");
}

std::string_view to_string(ClauseKind kind) {
  return kind == ClauseKind::kObjective ? "objective" : "constraint";
}

std::string_view to_string(ClauseStatus status) {
  switch (status) {
    case ClauseStatus::kExtracted: return "extracted";
    case ClauseStatus::kFormulated: return "formulated";
    case ClauseStatus::kCoded: return "coded";
  }
  return "extracted";
}

Bounds Variable::effective_bounds() const {
  if (bounds) return *bounds;
  if (type == VarType::kBinary) return Bounds{0.0, 1.0};
  return Bounds{};
}

// ---------------------------------------------------------------------------
// ConnectionGraph

bool ConnectionGraph::add(const std::string& clause_id, const std::string& symbol) {
  if (contains(clause_id, symbol)) return false;
  edges_.emplace_back(clause_id, symbol);
  return true;
}

bool ConnectionGraph::contains(const std::string& clause_id, const std::string& symbol) const {
  return std::find(edges_.begin(), edges_.end(), Edge{clause_id, symbol}) != edges_.end();
}

void ConnectionGraph::remove_clause(std::string clause_id) {
  std::erase_if(edges_, [&](const Edge& e) { return e.first == clause_id; });
}

void ConnectionGraph::remove_symbol(std::string symbol) {
  std::erase_if(edges_, [&](const Edge& e) { return e.second == symbol; });
}

std::vector<std::string> ConnectionGraph::neighbors_of_clause(const std::string& clause_id) const {
  std::vector<std::string> out;
  for (const auto& [c, s] : edges_) {
    if (c == clause_id) out.push_back(s);
  }
  return out;
}

std::vector<std::string> ConnectionGraph::clauses_of_symbol(const std::string& symbol) const {
  std::vector<std::string> out;
  for (const auto& [c, s] : edges_) {
    if (s == symbol) out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// State

State new_state(std::string background) { return State(std::move(background)); }

void State::check_new_symbol(const std::string& symbol, const Shape& shape) const {
  if (symbol.empty()) throw Error(ErrorCode::kInvalidArgument, "empty symbol");
  if (has_symbol(symbol)) throw Error(ErrorCode::kDuplicateSymbol, "symbol '" + symbol + "' already defined");
  if (find_clause(symbol) != nullptr) {
    throw Error(ErrorCode::kDuplicateSymbol, "symbol '" + symbol + "' collides with a clause id");
  }
  for (const auto& dim : shape) {
    if (const auto* n = std::get_if<std::int64_t>(&dim); n && *n < 0) {
      throw Error(ErrorCode::kInvalidShape,
                  "symbol '" + symbol + "' has negative dimension " + std::to_string(*n));
    }
    if (const auto* s = std::get_if<std::string>(&dim); s && s->empty()) {
      throw Error(ErrorCode::kInvalidShape, "symbol '" + symbol + "' has an empty dimension name");
    }
  }
}

void State::add_parameter(Parameter parameter) {
  check_new_symbol(parameter.symbol, parameter.shape);
  parameters_.push_back(std::move(parameter));
}

void State::add_variable(Variable variable) {
  check_new_symbol(variable.symbol, variable.shape);
  if (variable.type == VarType::kBinary && variable.bounds &&
      (variable.bounds->lower < 0.0 || variable.bounds->upper > 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "binary variable '" + variable.symbol + "' has bounds outside [0,1]");
  }
  if (variable.bounds && variable.bounds->lower > variable.bounds->upper) {
    throw Error(ErrorCode::kInvalidArgument, "variable '" + variable.symbol + "' has lower > upper");
  }
  variables_.push_back(std::move(variable));
}

void State::add_clause(Clause clause) {
  if (clause.id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty clause id");
  if (find_clause(clause.id) != nullptr) {
    throw Error(ErrorCode::kDuplicateClause, "clause '" + clause.id + "' already exists");
  }
  if (has_symbol(clause.id)) {
    throw Error(ErrorCode::kDuplicateClause, "clause id '" + clause.id + "' collides with a symbol");
  }
  if (clause.confidence && (*clause.confidence < 1 || *clause.confidence > 5)) {
    throw Error(ErrorCode::kInvalidArgument, "clause confidence must be in 1..5");
  }
  clauses_.push_back(std::move(clause));
}

SymbolKind State::symbol_kind(const std::string& symbol) const {
  if (find_parameter(symbol)) return SymbolKind::kParameter;
  if (find_variable(symbol)) return SymbolKind::kVariable;
  return SymbolKind::kNone;
}

const Parameter* State::find_parameter(const std::string& symbol) const {
  auto it = std::find_if(parameters_.begin(), parameters_.end(),
                         [&](const Parameter& p) { return p.symbol == symbol; });
  return it == parameters_.end() ? nullptr : &*it;
}

const Variable* State::find_variable(const std::string& symbol) const {
  auto it = std::find_if(variables_.begin(), variables_.end(),
                         [&](const Variable& v) { return v.symbol == symbol; });
  return it == variables_.end() ? nullptr : &*it;
}

Variable* State::find_variable(const std::string& symbol) {
  return const_cast<Variable*>(std::as_const(*this).find_variable(symbol));
}

const Clause* State::find_clause(const std::string& id) const {
  auto it = std::find_if(clauses_.begin(), clauses_.end(), [&](const Clause& c) { return c.id == id; });
  return it == clauses_.end() ? nullptr : &*it;
}

Clause* State::find_clause(const std::string& id) {
  return const_cast<Clause*>(std::as_const(*this).find_clause(id));
}

const Clause& State::clause(const std::string& id) const {
  const Clause* c = find_clause(id);
  if (c == nullptr) throw Error(ErrorCode::kUnknownClause, "unknown clause '" + id + "'");
  return *c;
}

Clause& State::clause(const std::string& id) {
  return const_cast<Clause&>(std::as_const(*this).clause(id));
}

void State::connect(const std::string& clause_id, const std::string& symbol) {
  if (find_clause(clause_id) == nullptr) {
    throw Error(ErrorCode::kUnknownClause, "unknown clause '" + clause_id + "'");
  }
  if (!has_symbol(symbol)) throw Error(ErrorCode::kUnknownSymbol, "unknown symbol '" + symbol + "'");
  graph_.add(clause_id, symbol);
}

void State::disconnect_clause(std::string clause_id) { graph_.remove_clause(clause_id); }

void State::remove_clause(std::string clause_id) {
  auto it = std::find_if(clauses_.begin(), clauses_.end(),
                         [&](const Clause& c) { return c.id == clause_id; });
  if (it == clauses_.end()) throw Error(ErrorCode::kUnknownClause, "unknown clause '" + clause_id + "'");
  clauses_.erase(it);
  graph_.remove_clause(clause_id);
}

void State::remove_symbol(std::string symbol) {
  auto pit = std::find_if(parameters_.begin(), parameters_.end(),
                          [&](const Parameter& p) { return p.symbol == symbol; });
  if (pit != parameters_.end()) {
    parameters_.erase(pit);
  } else {
    auto vit = std::find_if(variables_.begin(), variables_.end(),
                            [&](const Variable& v) { return v.symbol == symbol; });
    if (vit == variables_.end()) throw Error(ErrorCode::kUnknownSymbol, "unknown symbol '" + symbol + "'");
    variables_.erase(vit);
  }
  graph_.remove_symbol(symbol);
  data_.erase(symbol);
}

void State::parameter_to_variable(std::string symbol, VarType type) {
  auto it = std::find_if(parameters_.begin(), parameters_.end(),
                         [&](const Parameter& p) { return p.symbol == symbol; });
  if (it == parameters_.end()) throw Error(ErrorCode::kUnknownSymbol, "unknown parameter '" + symbol + "'");
  Variable v{it->symbol, it->shape, it->definition, type, std::nullopt};
  parameters_.erase(it);
  data_.erase(symbol);
  variables_.push_back(std::move(v));
}

void State::variable_to_parameter(std::string symbol) {
  auto it = std::find_if(variables_.begin(), variables_.end(),
                         [&](const Variable& v) { return v.symbol == symbol; });
  if (it == variables_.end()) throw Error(ErrorCode::kUnknownSymbol, "unknown variable '" + symbol + "'");
  Parameter p{it->symbol, it->shape, it->definition};
  variables_.erase(it);
  parameters_.push_back(std::move(p));
}

void State::bind_data(const std::string& symbol, Tensor tensor) {
  const Parameter* p = find_parameter(symbol);
  if (p == nullptr) throw Error(ErrorCode::kUnknownSymbol, "no parameter '" + symbol + "' to bind data to");
  if (tensor.values.size() != tensor.element_count()) {
    throw Error(ErrorCode::kShapeMismatch, "tensor for '" + symbol + "' has " +
                                               std::to_string(tensor.values.size()) +
                                               " values but shape implies " +
                                               std::to_string(tensor.element_count()));
  }
  if (tensor.shape.size() != p->shape.size()) {
    throw Error(ErrorCode::kShapeMismatch, "tensor for '" + symbol + "' has rank " +
                                               std::to_string(tensor.shape.size()) + ", parameter has rank " +
                                               std::to_string(p->shape.size()));
  }
  for (std::size_t axis = 0; axis < p->shape.size(); ++axis) {
    const Dim& dim = p->shape[axis];
    std::optional<std::int64_t> expected;
    if (const auto* n = std::get_if<std::int64_t>(&dim)) {
      expected = *n;
    } else {
      const auto& name = std::get<std::string>(dim);
      // The tensor being rebound must not vote on its own extent.
      Tensor previous;
      bool had = false;
      if (auto it = data_.find(symbol); it != data_.end()) {
        previous = it->second;
        had = true;
        data_.erase(it);
      }
      expected = resolve_dim(name);
      if (had) data_.emplace(symbol, std::move(previous));
    }
    if (expected && *expected != tensor.shape[axis]) {
      throw Error(ErrorCode::kShapeMismatch,
                  "tensor for '" + symbol + "' has extent " + std::to_string(tensor.shape[axis]) +
                      " on axis " + std::to_string(axis) + " but " + dim_to_string(dim) + " = " +
                      std::to_string(*expected));
    }
  }
  for (double v : tensor.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite data for '" + symbol + "'");
  }
  data_[symbol] = std::move(tensor);
}

const Tensor* State::find_data(const std::string& symbol) const {
  auto it = data_.find(symbol);
  return it == data_.end() ? nullptr : &it->second;
}

std::optional<std::int64_t> State::resolve_dim(const std::string& name) const {
  if (const Parameter* p = find_parameter(name); p != nullptr && p->shape.empty()) {
    if (const Tensor* t = find_data(name); t != nullptr && t->values.size() == 1) {
      double v = t->values[0];
      if (v >= 0 && std::floor(v) == v) return static_cast<std::int64_t>(v);
    }
  }
  for (const Parameter& p : parameters_) {
    const Tensor* t = find_data(p.symbol);
    if (t == nullptr || t->shape.size() != p.shape.size()) continue;
    for (std::size_t axis = 0; axis < p.shape.size(); ++axis) {
      if (const auto* s = std::get_if<std::string>(&p.shape[axis]); s && *s == name) {
        return t->shape[axis];
      }
    }
  }
  return std::nullopt;
}

std::optional<std::vector<std::int64_t>> State::resolve_shape(const Shape& shape) const {
  std::vector<std::int64_t> out;
  out.reserve(shape.size());
  for (const Dim& dim : shape) {
    if (const auto* n = std::get_if<std::int64_t>(&dim)) {
      out.push_back(*n);
    } else {
      auto v = resolve_dim(std::get<std::string>(dim));
      if (!v) return std::nullopt;
      out.push_back(*v);
    }
  }
  return out;
}

ClauseContext State::context_for(const std::string& clause_id) const {
  if (find_clause(clause_id) == nullptr) {
    throw Error(ErrorCode::kUnknownClause, "unknown clause '" + clause_id + "'");
  }
  ClauseContext ctx;
  for (const auto& symbol : graph_.neighbors_of_clause(clause_id)) {
    if (const Parameter* p = find_parameter(symbol)) {
      ctx.parameters.push_back(*p);
    } else if (const Variable* v = find_variable(symbol)) {
      ctx.variables.push_back(*v);
    }
  }
  return ctx;
}

std::string State::next_clause_id() const {
  for (std::size_t n = clauses_.size() + 1;; ++n) {
    std::string id = "c" + std::to_string(n);
    if (find_clause(id) == nullptr && !has_symbol(id)) return id;
  }
}

void State::validate() const {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    if (!seen.insert(parameters_[i].symbol).second) {
      ju::violation("/parameters/" + std::to_string(i), "duplicate symbol '" + parameters_[i].symbol + "'");
    }
  }
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const auto& v = variables_[i];
    if (!seen.insert(v.symbol).second) {
      ju::violation("/variables/" + std::to_string(i), "duplicate symbol '" + v.symbol + "'");
    }
    if (v.type == VarType::kBinary && v.bounds && (v.bounds->lower < 0 || v.bounds->upper > 1)) {
      ju::violation("/variables/" + std::to_string(i), "binary bounds outside [0,1]");
    }
  }
  std::set<std::string> clause_ids;
  int objectives = 0;
  for (std::size_t i = 0; i < clauses_.size(); ++i) {
    const auto& c = clauses_[i];
    if (!clause_ids.insert(c.id).second) {
      ju::violation("/clauses/" + std::to_string(i), "duplicate clause id '" + c.id + "'");
    }
    if (seen.count(c.id)) ju::violation("/clauses/" + std::to_string(i), "clause id collides with a symbol");
    if (c.confidence && (*c.confidence < 1 || *c.confidence > 5)) {
      ju::violation("/clauses/" + std::to_string(i) + "/confidence", "must be in 1..5");
    }
    if (c.kind == ClauseKind::kObjective) ++objectives;
  }
  if (objectives > 1) ju::violation("/clauses", "more than one objective clause");
  std::set<Edge> edge_set;
  const auto& edges = graph_.edges();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& [c, s] = edges[i];
    std::string path = "/graph/" + std::to_string(i);
    if (!clause_ids.count(c)) ju::violation(path, "edge from unknown clause '" + c + "'");
    if (!seen.count(s)) ju::violation(path, "edge to unknown symbol '" + s + "'");
    if (!edge_set.insert(edges[i]).second) ju::violation(path, "duplicate edge");
  }
  for (const auto& [symbol, tensor] : data_) {
    if (find_parameter(symbol) == nullptr) ju::violation("/data/" + symbol, "data for unknown parameter");
    if (tensor.values.size() != tensor.element_count()) ju::violation("/data/" + symbol, "value count mismatch");
  }
}

// ---------------------------------------------------------------------------
// JSON

json shape_to_json(const Shape& shape) {
  json out = json::array();
  for (const Dim& d : shape) {
    if (const auto* s = std::get_if<std::string>(&d)) {
      out.push_back(*s);
    } else {
      out.push_back(std::get<std::int64_t>(d));
    }
  }
  return out;
}

Shape shape_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) ju::violation(path, "expected array");
  Shape shape;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& d = j[i];
    if (d.is_string()) {
      shape.emplace_back(d.get<std::string>());
    } else if (d.is_number_integer()) {
      auto n = d.get<std::int64_t>();
      if (n < 0) ju::violation(path + "/" + std::to_string(i), "negative dimension");
      shape.emplace_back(n);
    } else {
      ju::violation(path + "/" + std::to_string(i), "expected dimension name or integer");
    }
  }
  return shape;
}

json tensor_to_json(const Tensor& tensor) {
  return json{{"shape", tensor.shape}, {"values", tensor.values}};
}

Tensor tensor_from_json(const json& j, const std::string& path) {
  Tensor t;
  // Plain numbers and nested arrays are accepted as shorthand.
  if (j.is_number()) return Tensor::scalar(j.get<double>());
  if (j.is_array()) {
    std::vector<std::int64_t> shape;
    const json* cursor = &j;
    while (cursor->is_array()) {
      shape.push_back(static_cast<std::int64_t>(cursor->size()));
      if (cursor->empty()) break;
      cursor = &(*cursor)[0];
    }
    t.shape = shape;
    std::function<void(const json&, std::size_t, const std::string&)> walk =
        [&](const json& node, std::size_t depth, const std::string& p) {
          if (depth == shape.size()) {
            if (!node.is_number()) ju::violation(p, "expected number");
            t.values.push_back(node.get<double>());
            return;
          }
          if (!node.is_array() || static_cast<std::int64_t>(node.size()) != shape[depth]) {
            ju::violation(p, "ragged nested array");
          }
          for (std::size_t i = 0; i < node.size(); ++i) walk(node[i], depth + 1, p + "/" + std::to_string(i));
        };
    walk(j, 0, path);
    return t;
  }
  ju::expect_object(j, path, {"shape", "values"});
  const json& shape = ju::get_array(j, "shape", path);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!shape[i].is_number_integer() || shape[i].get<std::int64_t>() < 0) {
      ju::violation(path + "/shape/" + std::to_string(i), "expected non-negative integer");
    }
    t.shape.push_back(shape[i].get<std::int64_t>());
  }
  const json& values = ju::get_array(j, "values", path);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) ju::violation(path + "/values/" + std::to_string(i), "expected number");
    t.values.push_back(values[i].get<double>());
  }
  if (t.values.size() != t.element_count()) ju::violation(path, "value count does not match shape");
  return t;
}

json parameter_to_json(const Parameter& p) {
  return json{{"symbol", p.symbol}, {"shape", shape_to_json(p.shape)}, {"definition", p.definition}};
}

json variable_to_json(const Variable& v) {
  json out{{"symbol", v.symbol},
           {"shape", shape_to_json(v.shape)},
           {"definition", v.definition},
           {"type", std::string(to_string(v.type))}};
  if (v.bounds) {
    out["bounds"] = json::array({ju::number_to_json(v.bounds->lower), ju::number_to_json(v.bounds->upper)});
  } else {
    out["bounds"] = nullptr;
  }
  return out;
}

json clause_to_json(const Clause& c) {
  return json{{"id", c.id},
              {"kind", std::string(to_string(c.kind))},
              {"description", c.description},
              {"formulation", c.formulation},
              {"fragment", c.fragment ? json(*c.fragment) : json(nullptr)},
              {"status", std::string(to_string(c.status))},
              {"confidence", c.confidence ? json(*c.confidence) : json(nullptr)},
              {"low_confidence", c.low_confidence}};
}

Parameter parameter_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"symbol", "shape", "definition"});
  Parameter p;
  p.symbol = ju::get_string(j, "symbol", path);
  p.shape = shape_from_json(ju::require(j, "shape", path), path + "/shape");
  p.definition = ju::get_string_or(j, "definition", path, "");
  return p;
}

Variable variable_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path, {"symbol", "shape", "definition", "type", "bounds"});
  Variable v;
  v.symbol = ju::get_string(j, "symbol", path);
  v.shape = shape_from_json(ju::require(j, "shape", path), path + "/shape");
  v.definition = ju::get_string_or(j, "definition", path, "");
  try {
    v.type = var_type_from_string(ju::get_string(j, "type", path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSchemaViolation) throw;
    ju::violation(path + "/type", e.what());
  }
  if (auto it = j.find("bounds"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2) ju::violation(path + "/bounds", "expected [lower, upper]");
    v.bounds = Bounds{ju::number_from_json((*it)[0], path + "/bounds/0"),
                      ju::number_from_json((*it)[1], path + "/bounds/1")};
  }
  return v;
}

Clause clause_from_json(const json& j, const std::string& path) {
  ju::expect_object(j, path,
                    {"id", "kind", "description", "formulation", "fragment", "status", "confidence",
                     "low_confidence"});
  Clause c;
  c.id = ju::get_string(j, "id", path);
  std::string kind = ju::get_string(j, "kind", path);
  if (kind == "objective") {
    c.kind = ClauseKind::kObjective;
  } else if (kind == "constraint") {
    c.kind = ClauseKind::kConstraint;
  } else {
    ju::violation(path + "/kind", "expected 'objective' or 'constraint'");
  }
  c.description = ju::get_string_or(j, "description", path, "");
  c.formulation = ju::get_string_or(j, "formulation", path, "");
  if (auto it = j.find("fragment"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) ju::violation(path + "/fragment", "expected string");
    c.fragment = it->get<std::string>();
  }
  std::string status = ju::get_string_or(j, "status", path, "extracted");
  if (status == "extracted") {
    c.status = ClauseStatus::kExtracted;
  } else if (status == "formulated") {
    c.status = ClauseStatus::kFormulated;
  } else if (status == "coded") {
    c.status = ClauseStatus::kCoded;
  } else {
    ju::violation(path + "/status", "unknown status '" + status + "'");
  }
  if (auto it = j.find("confidence"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<int>() < 1 || it->get<int>() > 5) {
      ju::violation(path + "/confidence", "expected integer in 1..5");
    }
    c.confidence = it->get<int>();
  }
  c.low_confidence = ju::get_bool_or(j, "low_confidence", path, false);
  return c;
}

json state_to_json(const State& state) {
  json params = json::array();
  for (const auto& p : state.parameters()) params.push_back(parameter_to_json(p));
  json vars = json::array();
  for (const auto& v : state.variables()) vars.push_back(variable_to_json(v));
  json clauses = json::array();
  for (const auto& c : state.clauses()) clauses.push_back(clause_to_json(c));
  json graph = json::array();
  for (const auto& [c, s] : state.graph().edges()) graph.push_back(json::array({c, s}));
  json data = json::object();
  for (const auto& [symbol, tensor] : state.data()) data[symbol] = tensor_to_json(tensor);
  return json{{"version", kStateSchemaVersion},
              {"background", state.background()},
              {"description", state.description()},
              {"parameters", params},
              {"variables", vars},
              {"clauses", clauses},
              {"graph", graph},
              {"data", data}};
}

State state_from_json(const json& j) {
  ju::expect_object(j, "", {"version", "background", "description", "parameters", "variables", "clauses",
                            "graph", "data"});
  if (ju::get_int(j, "version", "") != kStateSchemaVersion) {
    ju::violation("/version", "unsupported schema version");
  }
  State state(ju::get_string(j, "background", ""));
  state.set_description(ju::get_string_or(j, "description", "", ""));

  auto rethrow_at = [](const std::string& path, const Error& e) {
    if (e.code() == ErrorCode::kSchemaViolation) throw e;
    ju::violation(path, std::string(e.code_name()) + ": " + e.what());
  };

  const json& params = ju::get_array(j, "parameters", "");
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::string path = "/parameters/" + std::to_string(i);
    try {
      state.add_parameter(parameter_from_json(params[i], path));
    } catch (const Error& e) {
      rethrow_at(path, e);
    }
  }
  const json& vars = ju::get_array(j, "variables", "");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    std::string path = "/variables/" + std::to_string(i);
    try {
      state.add_variable(variable_from_json(vars[i], path));
    } catch (const Error& e) {
      rethrow_at(path, e);
    }
  }
  const json& clauses = ju::get_array(j, "clauses", "");
  int objectives = 0;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    std::string path = "/clauses/" + std::to_string(i);
    try {
      Clause c = clause_from_json(clauses[i], path);
      if (c.kind == ClauseKind::kObjective && ++objectives > 1) ju::violation(path, "second objective clause");
      state.add_clause(std::move(c));
    } catch (const Error& e) {
      rethrow_at(path, e);
    }
  }
  const json& graph = ju::get_array(j, "graph", "");
  for (std::size_t i = 0; i < graph.size(); ++i) {
    std::string path = "/graph/" + std::to_string(i);
    const json& e = graph[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      ju::violation(path, "expected [clause_id, symbol]");
    }
    std::string c = e[0].get<std::string>();
    std::string s = e[1].get<std::string>();
    if (state.find_clause(c) == nullptr) ju::violation(path, "edge [" + c + ", " + s + "] from unknown clause");
    if (!state.has_symbol(s)) ju::violation(path, "edge [" + c + ", " + s + "] to unknown symbol");
    if (state.graph().contains(c, s)) ju::violation(path, "duplicate edge [" + c + ", " + s + "]");
    state.connect(c, s);
  }
  const json& data = ju::require(j, "data", "");
  if (!data.is_object()) ju::violation("/data", "expected object");
  for (const auto& item : data.items()) {
    std::string path = "/data/" + item.key();
    Tensor t = tensor_from_json(item.value(), path);
    try {
      state.bind_data(item.key(), std::move(t));
    } catch (const Error& e) {
      rethrow_at(path, e);
    }
  }
  return state;
}

void save_state(const State& state, const std::filesystem::path& path) {
  ju::write_file(path, state_to_json(state));
}

State load_state(const std::filesystem::path& path) {
  return state_from_json(ju::read_file(path));
}

}  // namespace nlmilp
