#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlmilp/model.hpp"
#include "nlmilp/state.hpp"

namespace nlmilp::ir {

// `name + offset`, or a literal position when `name` is empty.
struct IndexExpr {
  std::string name;
  std::int64_t offset = 0;
  bool operator==(const IndexExpr&) const = default;
};

// Upper end of an index range: `dim + offset`, or a literal when `dim` is empty.
struct SizeExpr {
  std::string dim;
  std::int64_t offset = 0;
  bool operator==(const SizeExpr&) const = default;
};

// name ranges over [start, end).
struct IndexSet {
  std::string name;
  std::int64_t start = 0;
  SizeExpr end;
  bool operator==(const IndexSet&) const = default;
};

struct SymbolRef {
  std::string symbol;
  std::vector<IndexExpr> indices;
  bool operator==(const SymbolRef&) const = default;
};

// coefficient * prod(parameters) * variable, summed over `sums`.
struct LinTerm {
  double coefficient = 1.0;
  std::vector<SymbolRef> parameters;
  std::optional<SymbolRef> variable;
  std::vector<IndexSet> sums;
  bool operator==(const LinTerm&) const = default;
};

struct LinExpr {
  std::vector<LinTerm> terms;
  bool operator==(const LinExpr&) const = default;
};

struct IRConstraint {
  std::vector<IndexSet> index_sets;
  LinExpr lhs;
  Relation relation = Relation::kLessEqual;
  LinExpr rhs;
  bool operator==(const IRConstraint&) const = default;
};

struct IRObjective {
  Sense sense = Sense::kMinimize;
  LinExpr expr;
  bool operator==(const IRObjective&) const = default;
};

enum class AnnotationKind { kSOS1, kSOS2, kIndicator, kSemiContinuous, kPiecewiseLinear };

std::string_view to_string(AnnotationKind kind);
std::optional<AnnotationKind> annotation_kind_from_string(std::string_view text);

struct StructureAnnotation {
  AnnotationKind kind = AnnotationKind::kSOS1;
  std::vector<IndexSet> index_sets;
  // SOS: either an explicit member list or one indexed member ranging over
  // `member_range`. Semi-continuous uses members[0]; piecewise uses
  // members[0] = y and members[1] = x.
  std::vector<SymbolRef> members;
  std::optional<IndexSet> member_range;
  // Indicator.
  std::optional<SymbolRef> trigger;
  int trigger_value = 1;
  LinExpr lhs;
  Relation relation = Relation::kLessEqual;
  LinExpr rhs;
  std::optional<double> big_m;
  // Semi-continuous bounds.
  LinExpr lower;
  LinExpr upper;
  // Piecewise-linear breakpoints (x, y).
  std::vector<std::pair<double, double>> breakpoints;
  bool operator==(const StructureAnnotation&) const = default;
};

using Statement = std::variant<IRConstraint, IRObjective, StructureAnnotation>;

// All statements produced from one clause's code.
struct Fragment {
  std::string clause_id;
  std::string source;
  std::vector<Statement> statements;
  bool operator==(const Fragment&) const = default;
};

// Symbols visible to the parser: what a clause may reference.
struct SymbolInfo {
  SymbolKind kind = SymbolKind::kParameter;
  Shape shape;
  VarType type = VarType::kContinuous;
};
using SymbolTable = std::map<std::string, SymbolInfo>;

SymbolTable symbols_of(const State& state);
SymbolTable symbols_of(const ClauseContext& context);

// Parses markup source into statements. Throws kParseError (message carries
// the column), kNonlinearTerm, or kUnknownSymbol.
std::vector<Statement> parse_statements(const std::string& source, const SymbolTable& symbols);

Fragment build_fragment(const Clause& clause, const std::string& source, const SymbolTable& symbols);

// Symbols mentioned by markup text, resolved against the table; identifiers
// that resolve to nothing are ignored. Order of first appearance.
std::vector<std::string> referenced_symbols(const std::string& source, const SymbolTable& symbols);

// Every symbol referenced by the fragment's statements.
std::vector<std::string> fragment_symbols(const Fragment& fragment);

std::string column_name(const std::string& symbol, const std::vector<std::int64_t>& index);

struct GroundOptions {
  double default_big_m = kDefaultBigM;
};

// Expands fragments against the state's data. Columns appear in first-use
// order (unused state variables last), rows in fragment order then
// lexicographic index order.
GroundModel ground(const std::vector<Fragment>& fragments, const State& state,
                   const GroundOptions& options = {});

nlohmann::json statement_to_json(const Statement& statement);
std::string describe(const Statement& statement);

}  // namespace nlmilp::ir
