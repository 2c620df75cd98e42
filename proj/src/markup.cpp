// Parser for the formulation markup: a small linear subset of LaTeX-ish math.
//
//   statement  := objective | sos | semicont | pwl | indicator | constraint
//   objective  := (minimize|maximize|min|max) [:] expr
//   constraint := expr rel expr [rel expr] [forall]
//   indicator  := ref [= 0|1] -> expr rel expr [with M = number] [forall]
//   sos        := (sos1|sos2) ( ref over idx [in range] | ref, ref, ... ) [forall]
//   semicont   := semicont ( ref , expr , expr ) [forall]
//   pwl        := pwl ( y_ref , x_ref , (x0, y0), (x1, y1), ... ) [forall]
//   forall     := [,] (forall | for all | \forall) idx [in range] {, idx [in range]}
//   range      := size | int : size        size := name [+|- int] | int
//   expr       := [+|-] term {(+|-) term}
//   term       := factor {[*|/] factor}        (juxtaposition multiplies)
//   factor     := number | ref | sum_idx term | sum_{idx [in range], ...} term | ( expr )
//   ref        := symbol | symbol_idx{_idx} | symbol_{idx, ...} | symbol[idx, ...]
//
// Statements are separated by ';' or newlines. Free indices in a constraint
// are universally quantified in order of first appearance.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "nlmilp/error.hpp"
#include "nlmilp/ir.hpp"

namespace nlmilp::ir {

namespace {

enum class Tok {
  kNumber,
  kIdent,
  kPlus,
  kMinus,
  kStar,
  kSlash,
  kCaret,
  kLParen,
  kRParen,
  kLBrace,
  kRBrace,
  kLBracket,
  kRBracket,
  kComma,
  kColon,
  kUnderscore,
  kLe,
  kGe,
  kEq,
  kArrow,
  kEnd,
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t column = 0;
};

[[noreturn]] void parse_fail(std::size_t column, const std::string& what) {
  throw Error(ErrorCode::kParseError, "parse error at column " + std::to_string(column + 1) + ": " + what);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

// LaTeX commands that carry no meaning for the linear grammar.
bool is_noise_command(const std::string& cmd) {
  static const std::set<std::string> kNoise = {"left", "right", "quad", "qquad", "displaystyle",
                                               "textstyle", "mathrm", "text", "big", "Big"};
  return kNoise.count(cmd) > 0;
}

std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = src.size();
  auto push = [&](Tok k, std::string text, std::size_t col) { out.push_back(Token{k, std::move(text), 0.0, col}); };
  while (i < n) {
    unsigned char ch = static_cast<unsigned char>(src[i]);
    if (std::isspace(ch) || ch == '$' || ch == '&') {
      ++i;
      continue;
    }
    // UTF-8 operators.
    auto utf = [&](std::string_view seq) { return src.compare(i, seq.size(), seq) == 0; };
    if (utf("≤")) { push(Tok::kLe, "<=", i); i += 3; continue; }
    if (utf("≥")) { push(Tok::kGe, ">=", i); i += 3; continue; }
    if (utf("⇒") || utf("→")) { push(Tok::kArrow, "->", i); i += 3; continue; }
    if (utf("·") || utf("×")) { push(Tok::kStar, "*", i); i += 2; continue; }
    if (utf("∀")) { push(Tok::kIdent, "forall", i); i += 3; continue; }
    if (utf("∑")) { push(Tok::kIdent, "sum", i); i += 3; continue; }
    if (utf("∈")) { push(Tok::kIdent, "in", i); i += 3; continue; }
    if (std::isdigit(ch) || (ch == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t start = i;
      while (i < n && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '.')) ++i;
      if (i < n && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < n && (src[j] == '+' || src[j] == '-')) ++j;
        if (j < n && std::isdigit(static_cast<unsigned char>(src[j]))) {
          i = j;
          while (i < n && std::isdigit(static_cast<unsigned char>(src[i]))) ++i;
        }
      }
      Token t{Tok::kNumber, src.substr(start, i - start), 0.0, start};
      try {
        std::size_t used = 0;
        t.number = std::stod(t.text, &used);
        if (used != t.text.size()) parse_fail(start, "malformed number '" + t.text + "'");
      } catch (const std::logic_error&) {
        parse_fail(start, "malformed number '" + t.text + "'");
      }
      out.push_back(t);
      continue;
    }
    if (ch == '\\') {
      std::size_t start = i;
      ++i;
      if (i < n && (src[i] == '{' || src[i] == '}')) {
        push(src[i] == '{' ? Tok::kLBrace : Tok::kRBrace, std::string(1, src[i]), start);
        ++i;
        continue;
      }
      if (i < n && !std::isalpha(static_cast<unsigned char>(src[i]))) {
        ++i;  // "\\", "\,", "\;" and friends
        continue;
      }
      std::size_t cs = i;
      while (i < n && std::isalpha(static_cast<unsigned char>(src[i]))) ++i;
      std::string cmd = src.substr(cs, i - cs);
      if (is_noise_command(cmd)) continue;
      if (cmd == "leq" || cmd == "le") { push(Tok::kLe, "<=", start); continue; }
      if (cmd == "geq" || cmd == "ge") { push(Tok::kGe, ">=", start); continue; }
      if (cmd == "cdot" || cmd == "times") { push(Tok::kStar, "*", start); continue; }
      if (cmd == "Rightarrow" || cmd == "implies" || cmd == "rightarrow" || cmd == "to") {
        push(Tok::kArrow, "->", start);
        continue;
      }
      if (cmd == "sum" || cmd == "forall" || cmd == "in" || cmd == "min" || cmd == "max") {
        push(Tok::kIdent, cmd, start);
        continue;
      }
      parse_fail(start, "unsupported command '\\" + cmd + "'");
    }
    if (std::isalpha(ch)) {
      std::size_t start = i;
      while (i < n) {
        char c = src[i];
        if (c == '_' && i + 1 < n && (src[i + 1] == '{')) break;
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
          ++i;
        } else {
          break;
        }
      }
      std::string word = src.substr(start, i - start);
      // "s.t." is decoration.
      if ((word == "s" || word == "S") && i + 2 < n && src[i] == '.' && std::tolower(src[i + 1]) == 't' &&
          src[i + 2] == '.') {
        i += 3;
        continue;
      }
      push(Tok::kIdent, word, start);
      continue;
    }
    std::size_t start = i;
    auto two = [&](const char* s) { return src.compare(i, 2, s) == 0; };
    if (src.compare(i, 3, "==>") == 0) { push(Tok::kArrow, "->", start); i += 3; continue; }
    if (two("<=")) { push(Tok::kLe, "<=", start); i += 2; continue; }
    if (two(">=")) { push(Tok::kGe, ">=", start); i += 2; continue; }
    if (two("=<")) { push(Tok::kLe, "<=", start); i += 2; continue; }
    if (two("=>")) { push(Tok::kArrow, "->", start); i += 2; continue; }
    if (two("->")) { push(Tok::kArrow, "->", start); i += 2; continue; }
    if (two("==")) { push(Tok::kEq, "=", start); i += 2; continue; }
    switch (ch) {
      case '+': push(Tok::kPlus, "+", start); break;
      case '-': push(Tok::kMinus, "-", start); break;
      case '*': push(Tok::kStar, "*", start); break;
      case '/': push(Tok::kSlash, "/", start); break;
      case '^': push(Tok::kCaret, "^", start); break;
      case '(': push(Tok::kLParen, "(", start); break;
      case ')': push(Tok::kRParen, ")", start); break;
      case '{': push(Tok::kLBrace, "{", start); break;
      case '}': push(Tok::kRBrace, "}", start); break;
      case '[': push(Tok::kLBracket, "[", start); break;
      case ']': push(Tok::kRBracket, "]", start); break;
      case ',': push(Tok::kComma, ",", start); break;
      case ':': push(Tok::kColon, ":", start); break;
      case '_': push(Tok::kUnderscore, "_", start); break;
      case '<': push(Tok::kLe, "<=", start); break;
      case '>': push(Tok::kGe, ">=", start); break;
      case '=': push(Tok::kEq, "=", start); break;
      default: parse_fail(start, std::string("unexpected character '") + src[i] + "'");
    }
    ++i;
  }
  out.push_back(Token{Tok::kEnd, "", 0.0, n});
  return out;
}

// Splits source into statements on ';' and newlines outside brackets.
std::vector<std::string> split_statements(const std::string& src) {
  std::vector<std::string> out;
  std::string current;
  int depth = 0;
  for (char c : src) {
    if (c == '(' || c == '{' || c == '[') ++depth;
    if (c == ')' || c == '}' || c == ']') depth = std::max(0, depth - 1);
    if ((c == ';' || c == '\n') && depth == 0) {
      out.push_back(current);
      current.clear();
      continue;
    }
    current.push_back(c);
  }
  out.push_back(current);
  std::vector<std::string> nonblank;
  for (auto& s : out) {
    bool blank = std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) || c == '$'; });
    if (!blank) nonblank.push_back(std::move(s));
  }
  return nonblank;
}

bool is_keyword(const std::string& w) {
  static const std::set<std::string> kWords = {"sum", "forall", "for", "in", "over", "minimize", "maximize",
                                               "min", "max", "sos1", "sos2", "semicont", "semicontinuous",
                                               "pwl", "all", "with"};
  return kWords.count(lower(w)) > 0;
}

std::optional<std::int64_t> as_int(const std::string& s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  return std::stoll(s);
}

// Terms of an expression under construction. Index sets of sums may still
// lack a range; those are inferred once the statement is complete.
struct PendingSet {
  IndexSet set;
  bool explicit_range = false;
};

struct PTerm {
  double coefficient = 1.0;
  std::vector<SymbolRef> parameters;
  std::optional<SymbolRef> variable;
  std::vector<PendingSet> sums;
};
using PExpr = std::vector<PTerm>;

class StatementParser {
 public:
  StatementParser(const std::string& text, const SymbolTable& symbols)
      : tokens_(tokenize(text)), symbols_(symbols) {}

  std::vector<Statement> parse();

  // Identifier resolution shared with referenced_symbols().
  static std::optional<std::pair<std::string, std::vector<std::string>>> split_symbol(
      const std::string& word, const SymbolTable& symbols);

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& next() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }
  bool accept(Tok k) {
    if (peek().kind == k) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_word(std::string_view w) {
    if (peek().kind == Tok::kIdent && lower(peek().text) == w) {
      ++pos_;
      return true;
    }
    return false;
  }
  const Token& expect(Tok k, const char* what) {
    if (peek().kind != k) parse_fail(peek().column, std::string("expected ") + what + ", found '" + peek().text + "'");
    return next();
  }

  bool at_forall() const {
    const Token& t = peek();
    if (t.kind == Tok::kComma) {
      const Token& u = peek(1);
      return u.kind == Tok::kIdent && (lower(u.text) == "forall" || lower(u.text) == "for");
    }
    return t.kind == Tok::kIdent && (lower(t.text) == "forall" || (lower(t.text) == "for" && peek(1).kind == Tok::kIdent &&
                                                                    lower(peek(1).text) == "all"));
  }

  std::vector<PendingSet> parse_forall();
  PendingSet parse_binding();
  void parse_range(PendingSet& binding);
  SizeExpr parse_size();
  IndexExpr parse_index();
  std::vector<IndexExpr> parse_subscript_list(Tok close);

  PExpr parse_expr();
  PExpr parse_term();
  PExpr parse_factor();
  PExpr parse_sum(std::vector<PendingSet> sets);
  SymbolRef parse_ref_tail(const std::string& symbol, std::vector<std::string> pieces, std::size_t column);
  SymbolRef parse_ref();

  Relation parse_relation();
  Statement parse_statement();
  Statement parse_objective(Sense sense);
  Statement parse_sos(int type);
  Statement parse_semicont();
  Statement parse_pwl();
  void finish_constraint(PExpr lhs, Relation rel, PExpr rhs, std::vector<Statement>& out);

  PExpr multiply(PExpr a, PExpr b, std::size_t column) const;

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const SymbolTable& symbols_;
};

bool starts_factor(const Token& t) {
  if (t.kind == Tok::kNumber || t.kind == Tok::kLParen) return true;
  if (t.kind != Tok::kIdent) return false;
  std::string w = lower(t.text);
  if (w == "sum" || starts_with(w, "sum_")) return true;
  return !is_keyword(t.text);
}

std::optional<std::pair<std::string, std::vector<std::string>>> StatementParser::split_symbol(
    const std::string& word, const SymbolTable& symbols) {
  if (symbols.count(word)) return std::make_pair(word, std::vector<std::string>{});
  // Longest known prefix ending right before an underscore.
  for (std::size_t cut = word.size(); cut-- > 1;) {
    if (word[cut] != '_') continue;
    std::string head = word.substr(0, cut);
    if (!symbols.count(head)) continue;
    std::vector<std::string> pieces;
    std::string rest = word.substr(cut + 1);
    std::stringstream ss(rest);
    std::string piece;
    while (std::getline(ss, piece, '_')) pieces.push_back(piece);
    return std::make_pair(head, pieces);
  }
  return std::nullopt;
}

IndexExpr StatementParser::parse_index() {
  IndexExpr idx;
  bool negative = false;
  if (accept(Tok::kMinus)) negative = true;
  const Token& t = next();
  if (t.kind == Tok::kNumber) {
    if (t.number != std::floor(t.number) || t.number < 0) parse_fail(t.column, "index must be a non-negative integer");
    idx.offset = static_cast<std::int64_t>(t.number) * (negative ? -1 : 1);
    return idx;
  }
  if (t.kind != Tok::kIdent || negative) parse_fail(t.column, "expected index, found '" + t.text + "'");
  idx.name = t.text;
  if (peek().kind == Tok::kPlus || peek().kind == Tok::kMinus) {
    bool minus = next().kind == Tok::kMinus;
    const Token& off = expect(Tok::kNumber, "index offset");
    idx.offset = static_cast<std::int64_t>(off.number) * (minus ? -1 : 1);
  }
  return idx;
}

std::vector<IndexExpr> StatementParser::parse_subscript_list(Tok close) {
  std::vector<IndexExpr> out;
  do {
    out.push_back(parse_index());
  } while (accept(Tok::kComma));
  expect(close, close == Tok::kRBrace ? "'}'" : "']'");
  return out;
}

SymbolRef StatementParser::parse_ref_tail(const std::string& symbol, std::vector<std::string> pieces,
                                          std::size_t column) {
  SymbolRef ref{symbol, {}};
  for (const auto& piece : pieces) {
    if (piece.empty()) parse_fail(column, "empty subscript in '" + symbol + "'");
    if (auto n = as_int(piece)) {
      ref.indices.push_back(IndexExpr{"", *n});
    } else {
      ref.indices.push_back(IndexExpr{piece, 0});
    }
  }
  if (peek().kind == Tok::kUnderscore && peek(1).kind == Tok::kLBrace) {
    pos_ += 2;
    auto more = parse_subscript_list(Tok::kRBrace);
    ref.indices.insert(ref.indices.end(), more.begin(), more.end());
  } else if (peek().kind == Tok::kLBracket) {
    ++pos_;
    auto more = parse_subscript_list(Tok::kRBracket);
    ref.indices.insert(ref.indices.end(), more.begin(), more.end());
  }
  const SymbolInfo& info = symbols_.at(symbol);
  std::size_t rank = info.shape.size();
  // "x_ij" for a rank-2 symbol: one fused piece of single-letter indices.
  if (ref.indices.size() == 1 && rank > 1 && ref.indices[0].offset == 0 && ref.indices[0].name.size() == rank &&
      std::all_of(ref.indices[0].name.begin(), ref.indices[0].name.end(),
                  [](unsigned char c) { return std::isalpha(c); })) {
    std::string fused = ref.indices[0].name;
    ref.indices.clear();
    for (char c : fused) ref.indices.push_back(IndexExpr{std::string(1, c), 0});
  }
  if (ref.indices.size() != rank) {
    parse_fail(column, "'" + symbol + "' expects " + std::to_string(rank) + " index(es), got " +
                           std::to_string(ref.indices.size()));
  }
  return ref;
}

SymbolRef StatementParser::parse_ref() {
  const Token& t = expect(Tok::kIdent, "symbol");
  auto split = split_symbol(t.text, symbols_);
  if (!split) throw Error(ErrorCode::kUnknownSymbol, "unknown symbol '" + t.text + "' at column " + std::to_string(t.column + 1));
  return parse_ref_tail(split->first, split->second, t.column);
}

SizeExpr StatementParser::parse_size() {
  const Token& t = next();
  if (t.kind == Tok::kNumber) return SizeExpr{"", static_cast<std::int64_t>(t.number)};
  if (t.kind != Tok::kIdent) parse_fail(t.column, "expected range size, found '" + t.text + "'");
  SizeExpr size{t.text, 0};
  if ((peek().kind == Tok::kPlus || peek().kind == Tok::kMinus) && peek(1).kind == Tok::kNumber) {
    bool minus = next().kind == Tok::kMinus;
    size.offset = static_cast<std::int64_t>(next().number) * (minus ? -1 : 1);
  }
  return size;
}

void StatementParser::parse_range(PendingSet& binding) {
  binding.explicit_range = true;
  if (peek().kind == Tok::kNumber && peek(1).kind == Tok::kColon) {
    binding.set.start = static_cast<std::int64_t>(next().number);
    next();
  }
  binding.set.end = parse_size();
}

PendingSet StatementParser::parse_binding() {
  const Token& t = expect(Tok::kIdent, "index name");
  if (is_keyword(t.text)) parse_fail(t.column, "expected index name, found keyword '" + t.text + "'");
  PendingSet binding;
  binding.set.name = t.text;
  if (accept_word("in")) parse_range(binding);
  return binding;
}

std::vector<PendingSet> StatementParser::parse_forall() {
  accept(Tok::kComma);
  if (!accept_word("forall")) {
    accept_word("for");
    accept_word("all");
  }
  std::vector<PendingSet> out;
  do {
    out.push_back(parse_binding());
  } while (accept(Tok::kComma));
  return out;
}

PExpr StatementParser::multiply(PExpr a, PExpr b, std::size_t column) const {
  PExpr out;
  for (const PTerm& x : a) {
    for (const PTerm& y : b) {
      if (x.variable && y.variable) {
        throw Error(ErrorCode::kNonlinearTerm, "product of variables '" + x.variable->symbol + "' and '" +
                                                   y.variable->symbol + "' at column " + std::to_string(column + 1));
      }
      PTerm t;
      t.coefficient = x.coefficient * y.coefficient;
      t.parameters = x.parameters;
      t.parameters.insert(t.parameters.end(), y.parameters.begin(), y.parameters.end());
      t.variable = x.variable ? x.variable : y.variable;
      t.sums = x.sums;
      t.sums.insert(t.sums.end(), y.sums.begin(), y.sums.end());
      out.push_back(std::move(t));
    }
  }
  return out;
}

PExpr StatementParser::parse_sum(std::vector<PendingSet> sets) {
  PExpr body = parse_term();
  for (PTerm& t : body) {
    for (const PendingSet& s : sets) {
      for (const PendingSet& existing : t.sums) {
        if (existing.set.name == s.set.name) parse_fail(peek().column, "index '" + s.set.name + "' summed twice");
      }
    }
    t.sums.insert(t.sums.begin(), sets.begin(), sets.end());
  }
  return body;
}

PExpr StatementParser::parse_factor() {
  const Token& t = peek();
  if (t.kind == Tok::kMinus) {
    next();
    PExpr e = parse_factor();
    for (auto& term : e) term.coefficient = -term.coefficient;
    return e;
  }
  if (t.kind == Tok::kNumber) {
    next();
    return PExpr{PTerm{t.number, {}, std::nullopt, {}}};
  }
  if (t.kind == Tok::kLParen) {
    next();
    PExpr e = parse_expr();
    expect(Tok::kRParen, "')'");
    return e;
  }
  if (t.kind == Tok::kIdent) {
    std::string w = lower(t.text);
    if (w == "sum") {
      next();
      std::vector<PendingSet> sets;
      if (accept(Tok::kUnderscore)) {
        if (accept(Tok::kLBrace)) {
          do {
            sets.push_back(parse_binding());
          } while (accept(Tok::kComma));
          expect(Tok::kRBrace, "'}'");
        } else {
          sets.push_back(parse_binding());
        }
      } else if (accept(Tok::kLBrace)) {
        do {
          sets.push_back(parse_binding());
        } while (accept(Tok::kComma));
        expect(Tok::kRBrace, "'}'");
      } else {
        parse_fail(t.column, "sum needs an index");
      }
      return parse_sum(std::move(sets));
    }
    if (starts_with(w, "sum_") && !symbols_.count(t.text)) {
      next();
      std::vector<PendingSet> sets;
      std::stringstream ss(t.text.substr(4));
      std::string piece;
      while (std::getline(ss, piece, '_')) {
        if (piece.empty()) continue;
        PendingSet s;
        s.set.name = piece;
        sets.push_back(s);
      }
      if (sets.empty()) parse_fail(t.column, "sum needs an index");
      if (accept_word("in")) parse_range(sets.back());
      return parse_sum(std::move(sets));
    }
    if (is_keyword(t.text)) parse_fail(t.column, "unexpected keyword '" + t.text + "'");
    SymbolRef ref = parse_ref();
    const SymbolInfo& info = symbols_.at(ref.symbol);
    PTerm term;
    if (info.kind == SymbolKind::kVariable) {
      term.variable = std::move(ref);
    } else {
      term.parameters.push_back(std::move(ref));
    }
    return PExpr{std::move(term)};
  }
  parse_fail(t.column, "unexpected '" + t.text + "'");
}

PExpr StatementParser::parse_term() {
  PExpr acc = parse_factor();
  while (true) {
    const Token& t = peek();
    if (t.kind == Tok::kStar) {
      next();
      acc = multiply(std::move(acc), parse_factor(), t.column);
    } else if (t.kind == Tok::kSlash) {
      next();
      PExpr d = parse_factor();
      if (d.size() != 1 || d[0].variable) {
        throw Error(ErrorCode::kNonlinearTerm, "division by an expression at column " + std::to_string(t.column + 1));
      }
      if (!d[0].parameters.empty() || !d[0].sums.empty()) {
        parse_fail(t.column, "division by a parameter is not supported");
      }
      if (d[0].coefficient == 0.0) parse_fail(t.column, "division by zero");
      for (auto& term : acc) term.coefficient /= d[0].coefficient;
    } else if (t.kind == Tok::kCaret) {
      next();
      const Token& e = next();
      bool only_numbers = std::all_of(acc.begin(), acc.end(), [](const PTerm& p) {
        return !p.variable && p.parameters.empty() && p.sums.empty();
      });
      if (e.kind != Tok::kNumber) parse_fail(e.column, "exponent must be a number");
      if (!only_numbers || acc.size() != 1) {
        if (e.number == 1.0) continue;
        throw Error(ErrorCode::kNonlinearTerm, "power of a symbol at column " + std::to_string(t.column + 1));
      }
      acc[0].coefficient = std::pow(acc[0].coefficient, e.number);
    } else if (starts_factor(t)) {
      acc = multiply(std::move(acc), parse_factor(), t.column);
    } else {
      break;
    }
  }
  return acc;
}

PExpr StatementParser::parse_expr() {
  PExpr out;
  bool negative = false;
  if (accept(Tok::kPlus)) {
  } else if (accept(Tok::kMinus)) {
    negative = true;
  }
  while (true) {
    PExpr term = parse_term();
    if (negative) {
      for (auto& t : term) t.coefficient = -t.coefficient;
    }
    out.insert(out.end(), term.begin(), term.end());
    if (accept(Tok::kPlus)) {
      negative = false;
    } else if (accept(Tok::kMinus)) {
      negative = true;
    } else {
      break;
    }
  }
  return out;
}

Relation StatementParser::parse_relation() {
  const Token& t = next();
  switch (t.kind) {
    case Tok::kLe: return Relation::kLessEqual;
    case Tok::kGe: return Relation::kGreaterEqual;
    case Tok::kEq: return Relation::kEqual;
    default: parse_fail(t.column, "expected relation, found '" + t.text + "'");
  }
}

bool is_relation(Tok k) { return k == Tok::kLe || k == Tok::kGe || k == Tok::kEq; }

// ---------------------------------------------------------------------------
// Index resolution once a statement is complete.

struct IndexUse {
  std::string symbol;
  std::size_t axis;
};

void collect_uses(const SymbolRef& ref, std::map<std::string, std::vector<IndexUse>>& uses,
                  std::vector<std::string>& order) {
  for (std::size_t axis = 0; axis < ref.indices.size(); ++axis) {
    const auto& idx = ref.indices[axis];
    if (idx.name.empty()) continue;
    if (!uses.count(idx.name)) order.push_back(idx.name);
    uses[idx.name].push_back(IndexUse{ref.symbol, axis});
  }
}

SizeExpr infer_size(const std::string& index, const std::vector<IndexUse>& uses, const SymbolTable& symbols,
                    const std::string& where) {
  for (const auto& use : uses) {
    const Dim& dim = symbols.at(use.symbol).shape[use.axis];
    if (const auto* name = std::get_if<std::string>(&dim)) return SizeExpr{*name, 0};
    return SizeExpr{"", std::get<std::int64_t>(dim)};
  }
  throw Error(ErrorCode::kParseError, "cannot infer the range of index '" + index + "' in " + where);
}

IndexSet resolve_set(const PendingSet& pending, const std::map<std::string, std::vector<IndexUse>>& uses,
                     const SymbolTable& symbols, const std::string& where) {
  if (pending.explicit_range) return pending.set;
  IndexSet s = pending.set;
  auto it = uses.find(s.name);
  s.end = infer_size(s.name, it == uses.end() ? std::vector<IndexUse>{} : it->second, symbols, where);
  return s;
}

// Resolves sum ranges inside each term; returns outer index uses.
LinExpr resolve_expr(const PExpr& expr, const SymbolTable& symbols,
                     std::map<std::string, std::vector<IndexUse>>& outer_uses, std::vector<std::string>& outer_order) {
  LinExpr out;
  for (const PTerm& p : expr) {
    std::map<std::string, std::vector<IndexUse>> uses;
    std::vector<std::string> order;
    for (const auto& r : p.parameters) collect_uses(r, uses, order);
    if (p.variable) collect_uses(*p.variable, uses, order);
    LinTerm t;
    t.coefficient = p.coefficient;
    t.parameters = p.parameters;
    t.variable = p.variable;
    std::set<std::string> summed;
    for (const PendingSet& s : p.sums) {
      t.sums.push_back(resolve_set(s, uses, symbols, "sum"));
      summed.insert(s.set.name);
    }
    for (const auto& name : order) {
      if (summed.count(name)) continue;
      if (!outer_uses.count(name)) outer_order.push_back(name);
      auto& dst = outer_uses[name];
      dst.insert(dst.end(), uses[name].begin(), uses[name].end());
    }
    out.terms.push_back(std::move(t));
  }
  return out;
}

std::vector<IndexSet> resolve_foralls(const std::vector<PendingSet>& explicit_sets,
                                      const std::map<std::string, std::vector<IndexUse>>& uses,
                                      const std::vector<std::string>& order, const SymbolTable& symbols,
                                      bool allow_implicit) {
  std::vector<IndexSet> out;
  std::set<std::string> bound;
  for (const auto& p : explicit_sets) {
    if (!bound.insert(p.set.name).second) {
      throw Error(ErrorCode::kParseError, "index '" + p.set.name + "' quantified twice");
    }
    out.push_back(resolve_set(p, uses, symbols, "forall"));
  }
  for (const auto& name : order) {
    if (bound.count(name)) continue;
    if (!allow_implicit) throw Error(ErrorCode::kParseError, "free index '" + name + "'");
    bound.insert(name);
    out.push_back(resolve_set(PendingSet{IndexSet{name, 0, {}}, false}, uses, symbols, "forall"));
  }
  return out;
}

bool has_variable(const PExpr& e) {
  return std::any_of(e.begin(), e.end(), [](const PTerm& t) { return t.variable.has_value(); });
}

void StatementParser::finish_constraint(PExpr lhs, Relation rel, PExpr rhs, std::vector<Statement>& out) {
  std::optional<std::pair<Relation, PExpr>> chained;
  if (is_relation(peek().kind)) {
    Relation rel2 = parse_relation();
    chained.emplace(rel2, parse_expr());
  }
  std::vector<PendingSet> foralls;
  if (at_forall()) foralls = parse_forall();
  if (peek().kind != Tok::kEnd) parse_fail(peek().column, "unexpected '" + peek().text + "'");

  auto emit = [&](const PExpr& a, Relation r, const PExpr& b) {
    std::map<std::string, std::vector<IndexUse>> uses;
    std::vector<std::string> order;
    IRConstraint c;
    c.lhs = resolve_expr(a, symbols_, uses, order);
    c.relation = r;
    c.rhs = resolve_expr(b, symbols_, uses, order);
    c.index_sets = resolve_foralls(foralls, uses, order, symbols_, true);
    out.emplace_back(std::move(c));
  };
  if (chained) {
    emit(lhs, rel, rhs);
    emit(rhs, chained->first, chained->second);
  } else {
    emit(lhs, rel, rhs);
  }
}

Statement StatementParser::parse_objective(Sense sense) {
  accept(Tok::kColon);
  PExpr e = parse_expr();
  if (peek().kind != Tok::kEnd) parse_fail(peek().column, "unexpected '" + peek().text + "' after objective");
  std::map<std::string, std::vector<IndexUse>> uses;
  std::vector<std::string> order;
  IRObjective obj;
  obj.sense = sense;
  obj.expr = resolve_expr(e, symbols_, uses, order);
  if (!order.empty()) throw Error(ErrorCode::kParseError, "objective has free index '" + order.front() + "'");
  return obj;
}

Statement StatementParser::parse_sos(int type) {
  expect(Tok::kLParen, "'('");
  StructureAnnotation a;
  a.kind = type == 1 ? AnnotationKind::kSOS1 : AnnotationKind::kSOS2;
  std::map<std::string, std::vector<IndexUse>> uses;
  std::vector<std::string> order;
  SymbolRef first = parse_ref();
  std::optional<PendingSet> range;
  if (accept_word("over") || accept_word("for")) {
    range = parse_binding();
  }
  a.members.push_back(first);
  while (!range && accept(Tok::kComma)) a.members.push_back(parse_ref());
  expect(Tok::kRParen, "')'");
  std::vector<PendingSet> foralls;
  if (at_forall()) foralls = parse_forall();
  if (peek().kind != Tok::kEnd) parse_fail(peek().column, "unexpected '" + peek().text + "'");
  for (const auto& m : a.members) collect_uses(m, uses, order);
  if (range) {
    a.member_range = resolve_set(*range, uses, symbols_, "SOS member range");
    std::erase(order, range->set.name);
  }
  for (const auto& m : a.members) {
    if (symbols_.at(m.symbol).kind != SymbolKind::kVariable) {
      throw Error(ErrorCode::kInvalidAnnotation, "SOS member '" + m.symbol + "' is not a variable");
    }
  }
  a.index_sets = resolve_foralls(foralls, uses, order, symbols_, true);
  return a;
}

Statement StatementParser::parse_semicont() {
  expect(Tok::kLParen, "'('");
  StructureAnnotation a;
  a.kind = AnnotationKind::kSemiContinuous;
  a.members.push_back(parse_ref());
  expect(Tok::kComma, "','");
  PExpr lo = parse_expr();
  expect(Tok::kComma, "','");
  PExpr hi = parse_expr();
  expect(Tok::kRParen, "')'");
  std::vector<PendingSet> foralls;
  if (at_forall()) foralls = parse_forall();
  if (peek().kind != Tok::kEnd) parse_fail(peek().column, "unexpected '" + peek().text + "'");
  if (symbols_.at(a.members[0].symbol).kind != SymbolKind::kVariable) {
    throw Error(ErrorCode::kInvalidAnnotation, "semi-continuous target '" + a.members[0].symbol + "' is not a variable");
  }
  if (has_variable(lo) || has_variable(hi)) {
    throw Error(ErrorCode::kInvalidAnnotation, "semi-continuous bounds must not involve variables");
  }
  std::map<std::string, std::vector<IndexUse>> uses;
  std::vector<std::string> order;
  collect_uses(a.members[0], uses, order);
  a.lower = resolve_expr(lo, symbols_, uses, order);
  a.upper = resolve_expr(hi, symbols_, uses, order);
  a.index_sets = resolve_foralls(foralls, uses, order, symbols_, true);
  return a;
}

Statement StatementParser::parse_pwl() {
  expect(Tok::kLParen, "'('");
  StructureAnnotation a;
  a.kind = AnnotationKind::kPiecewiseLinear;
  a.members.push_back(parse_ref());
  expect(Tok::kComma, "','");
  a.members.push_back(parse_ref());
  auto signed_number = [&]() {
    bool neg = accept(Tok::kMinus);
    const Token& t = expect(Tok::kNumber, "breakpoint coordinate");
    return neg ? -t.number : t.number;
  };
  while (accept(Tok::kComma)) {
    expect(Tok::kLParen, "'(' opening a breakpoint");
    double x = signed_number();
    expect(Tok::kComma, "','");
    double y = signed_number();
    expect(Tok::kRParen, "')'");
    a.breakpoints.emplace_back(x, y);
  }
  expect(Tok::kRParen, "')'");
  std::vector<PendingSet> foralls;
  if (at_forall()) foralls = parse_forall();
  if (peek().kind != Tok::kEnd) parse_fail(peek().column, "unexpected '" + peek().text + "'");
  for (const auto& m : a.members) {
    if (symbols_.at(m.symbol).kind != SymbolKind::kVariable) {
      throw Error(ErrorCode::kInvalidAnnotation, "piecewise-linear argument '" + m.symbol + "' is not a variable");
    }
  }
  std::map<std::string, std::vector<IndexUse>> uses;
  std::vector<std::string> order;
  for (const auto& m : a.members) collect_uses(m, uses, order);
  a.index_sets = resolve_foralls(foralls, uses, order, symbols_, true);
  return a;
}

Statement StatementParser::parse_statement() {
  const Token& t = peek();
  if (t.kind == Tok::kIdent) {
    std::string w = lower(t.text);
    if ((w == "minimize" || w == "maximize" || w == "min" || w == "max") && !symbols_.count(t.text)) {
      next();
      return parse_objective(w.substr(0, 3) == "min" ? Sense::kMinimize : Sense::kMaximize);
    }
    if ((w == "sos1" || w == "sos2") && !symbols_.count(t.text)) {
      next();
      return parse_sos(w == "sos1" ? 1 : 2);
    }
    if ((w == "semicont" || w == "semicontinuous") && !symbols_.count(t.text)) {
      next();
      return parse_semicont();
    }
    if (w == "pwl" && !symbols_.count(t.text)) {
      next();
      return parse_pwl();
    }
  }
  parse_fail(t.column, "internal: not a keyword statement");
}

std::vector<Statement> StatementParser::parse() {
  std::vector<Statement> out;
  const Token& t = peek();
  if (t.kind == Tok::kEnd) parse_fail(t.column, "empty statement");
  if (t.kind == Tok::kIdent) {
    std::string w = lower(t.text);
    static const std::set<std::string> kLead = {"minimize", "maximize", "min", "max", "sos1",
                                                "sos2", "semicont", "semicontinuous", "pwl"};
    if (kLead.count(w) && !symbols_.count(t.text)) {
      out.push_back(parse_statement());
      return out;
    }
  }
  // Indicator: an arrow at the top level.
  bool arrow = std::any_of(tokens_.begin(), tokens_.end(), [](const Token& k) { return k.kind == Tok::kArrow; });
  if (arrow) {
    StructureAnnotation a;
    a.kind = AnnotationKind::kIndicator;
    SymbolRef trigger = parse_ref();
    if (symbols_.at(trigger.symbol).kind != SymbolKind::kVariable) {
      throw Error(ErrorCode::kInvalidAnnotation, "indicator trigger '" + trigger.symbol + "' is not a variable");
    }
    if (accept(Tok::kEq)) {
      const Token& v = expect(Tok::kNumber, "trigger value 0 or 1");
      if (v.number != 0.0 && v.number != 1.0) parse_fail(v.column, "trigger value must be 0 or 1");
      a.trigger_value = static_cast<int>(v.number);
    }
    expect(Tok::kArrow, "'->'");
    PExpr lhs = parse_expr();
    Relation rel = parse_relation();
    PExpr rhs = parse_expr();
    if (accept_word("with")) {
      const Token& m = expect(Tok::kIdent, "'M'");
      if (m.text != "M" && lower(m.text) != "bigm") parse_fail(m.column, "expected 'M'");
      expect(Tok::kEq, "'='");
      const Token& v = expect(Tok::kNumber, "big-M value");
      if (!(v.number > 0)) parse_fail(v.column, "big-M must be positive");
      a.big_m = v.number;
    }
    std::vector<PendingSet> foralls;
    if (at_forall()) foralls = parse_forall();
    if (peek().kind != Tok::kEnd) parse_fail(peek().column, "unexpected '" + peek().text + "'");
    std::map<std::string, std::vector<IndexUse>> uses;
    std::vector<std::string> order;
    collect_uses(trigger, uses, order);
    a.trigger = trigger;
    a.lhs = resolve_expr(lhs, symbols_, uses, order);
    a.relation = rel;
    a.rhs = resolve_expr(rhs, symbols_, uses, order);
    a.index_sets = resolve_foralls(foralls, uses, order, symbols_, true);
    out.emplace_back(std::move(a));
    return out;
  }
  PExpr lhs = parse_expr();
  if (!is_relation(peek().kind)) {
    parse_fail(peek().column, peek().kind == Tok::kEnd ? "missing relation" : "unexpected '" + peek().text + "'");
  }
  Relation rel = parse_relation();
  PExpr rhs = parse_expr();
  finish_constraint(std::move(lhs), rel, std::move(rhs), out);
  return out;
}

void collect_expr_symbols(const LinExpr& e, std::vector<std::string>& out) {
  auto add = [&](const std::string& s) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  };
  for (const auto& t : e.terms) {
    for (const auto& p : t.parameters) add(p.symbol);
    if (t.variable) add(t.variable->symbol);
    for (const auto& s : t.sums) {
      if (!s.end.dim.empty()) add(s.end.dim);
    }
  }
}

}  // namespace

std::string_view to_string(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::kSOS1: return "SOS1";
    case AnnotationKind::kSOS2: return "SOS2";
    case AnnotationKind::kIndicator: return "Indicator";
    case AnnotationKind::kSemiContinuous: return "SemiContinuous";
    case AnnotationKind::kPiecewiseLinear: return "PiecewiseLinear";
  }
  return "SOS1";
}

std::optional<AnnotationKind> annotation_kind_from_string(std::string_view text) {
  std::string w = lower(std::string(text));
  if (w == "sos1") return AnnotationKind::kSOS1;
  if (w == "sos2") return AnnotationKind::kSOS2;
  if (w == "indicator") return AnnotationKind::kIndicator;
  if (w == "semicontinuous" || w == "semi-continuous" || w == "semicont") return AnnotationKind::kSemiContinuous;
  if (w == "piecewiselinear" || w == "piecewise-linear" || w == "pwl") return AnnotationKind::kPiecewiseLinear;
  return std::nullopt;
}

SymbolTable symbols_of(const State& state) {
  SymbolTable table;
  for (const auto& p : state.parameters()) table[p.symbol] = SymbolInfo{SymbolKind::kParameter, p.shape, {}};
  for (const auto& v : state.variables()) table[v.symbol] = SymbolInfo{SymbolKind::kVariable, v.shape, v.type};
  return table;
}

SymbolTable symbols_of(const ClauseContext& context) {
  SymbolTable table;
  for (const auto& p : context.parameters) table[p.symbol] = SymbolInfo{SymbolKind::kParameter, p.shape, {}};
  for (const auto& v : context.variables) table[v.symbol] = SymbolInfo{SymbolKind::kVariable, v.shape, v.type};
  return table;
}

std::vector<Statement> parse_statements(const std::string& source, const SymbolTable& symbols) {
  std::vector<Statement> out;
  for (const auto& text : split_statements(source)) {
    StatementParser parser(text, symbols);
    auto stmts = parser.parse();
    out.insert(out.end(), stmts.begin(), stmts.end());
  }
  if (out.empty()) throw Error(ErrorCode::kParseError, "parse error at column 1: empty formulation");
  return out;
}

Fragment build_fragment(const Clause& clause, const std::string& source, const SymbolTable& symbols) {
  Fragment f;
  f.clause_id = clause.id;
  f.source = source;
  f.statements = parse_statements(source, symbols);
  for (const auto& s : f.statements) {
    bool is_objective = std::holds_alternative<IRObjective>(s);
    if (clause.kind == ClauseKind::kObjective && !is_objective) {
      throw Error(ErrorCode::kParseError, "objective clause '" + clause.id + "' contains a non-objective statement");
    }
    if (clause.kind == ClauseKind::kConstraint && is_objective) {
      throw Error(ErrorCode::kParseError, "constraint clause '" + clause.id + "' contains an objective");
    }
  }
  if (clause.kind == ClauseKind::kObjective && f.statements.size() != 1) {
    throw Error(ErrorCode::kParseError, "objective clause '" + clause.id + "' must hold exactly one objective");
  }
  return f;
}

std::vector<std::string> referenced_symbols(const std::string& source, const SymbolTable& symbols) {
  std::vector<std::string> out;
  std::vector<Token> tokens;
  try {
    tokens = tokenize(source);
  } catch (const Error&) {
    // Best effort on text that is not valid markup: scan identifier runs.
    std::string word;
    for (char c : source + " ") {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        word.push_back(c);
      } else {
        if (!word.empty()) tokens.push_back(Token{Tok::kIdent, word, 0.0, 0});
        word.clear();
      }
    }
  }
  for (const auto& t : tokens) {
    if (t.kind != Tok::kIdent) continue;
    auto split = StatementParser::split_symbol(t.text, symbols);
    if (!split) continue;
    if (std::find(out.begin(), out.end(), split->first) == out.end()) out.push_back(split->first);
  }
  return out;
}

std::vector<std::string> fragment_symbols(const Fragment& fragment) {
  std::vector<std::string> out;
  auto add_ref = [&](const SymbolRef& r) {
    if (std::find(out.begin(), out.end(), r.symbol) == out.end()) out.push_back(r.symbol);
  };
  for (const auto& s : fragment.statements) {
    if (const auto* c = std::get_if<IRConstraint>(&s)) {
      collect_expr_symbols(c->lhs, out);
      collect_expr_symbols(c->rhs, out);
    } else if (const auto* o = std::get_if<IRObjective>(&s)) {
      collect_expr_symbols(o->expr, out);
    } else {
      const auto& a = std::get<StructureAnnotation>(s);
      if (a.trigger) add_ref(*a.trigger);
      for (const auto& m : a.members) add_ref(m);
      collect_expr_symbols(a.lhs, out);
      collect_expr_symbols(a.rhs, out);
      collect_expr_symbols(a.lower, out);
      collect_expr_symbols(a.upper, out);
    }
  }
  return out;
}

}  // namespace nlmilp::ir
