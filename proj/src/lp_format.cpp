// CPLEX-style LP text. Supported subset:
//
//   \Problem name: <name>
//   \big-M <indicator> <value>        (non-default indicator M)
//   Minimize | Maximize
//    obj: <terms> [+ constant]
//   Subject To
//    <name>: <terms> <= | >= | = <number>
//    <name>: <binary> = 0|1 -> <terms> <rel> <number>
//   Bounds
//    <lo> <= <name> <= <up> | <name> = <v> | <name> free | <name> >= <lo> | <name> <= <up>
//   Generals / Binaries / Semi-continuous
//    <names...>
//   SOS
//    <name>: S1:: <col>:<weight> ...
//   End
//
// The writer lists every column in the objective (zero coefficients
// included) so parsing recovers the column order.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "nlmilp/error.hpp"
#include "nlmilp/json_util.hpp"
#include "nlmilp/solver.hpp"

namespace nlmilp {

namespace {

constexpr std::size_t kTermsPerLine = 8;

std::string rel_text(Relation r) {
  switch (r) {
    case Relation::kLessEqual: return "<=";
    case Relation::kGreaterEqual: return ">=";
    case Relation::kEqual: return "=";
  }
  return "<=";
}

std::string bound_text(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return format_number(v);
}

void write_terms(std::ostringstream& os, const std::vector<int>& cols, const std::vector<double>& vals,
                 const GroundModel& m) {
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (k > 0 && k % kTermsPerLine == 0) os << "\n   ";
    double v = vals[k];
    if (k == 0) {
      if (v < 0 || std::signbit(v)) os << "-";
    } else {
      os << ((v < 0 || std::signbit(v)) ? " - " : " + ");
    }
    double mag = std::fabs(v);
    if (mag != 1.0) os << format_number(mag) << " ";
    os << m.col_names[cols[k]];
  }
}

}  // namespace

std::string write_lp(const GroundModel& m) {
  m.check();
  if (!m.piecewise.empty()) {
    throw Error(ErrorCode::kUnrepresentableAnnotation, "piecewise-linear constraints have no LP-format section");
  }
  std::ostringstream os;
  if (!m.name.empty()) os << "\\Problem name: " << m.name << "\n";
  for (const IndicatorRow& ind : m.indicators) {
    if (ind.big_m != kDefaultBigM) os << "\\big-M " << ind.name << " " << format_number(ind.big_m) << "\n";
  }
  os << (m.sense == Sense::kMinimize ? "Minimize\n" : "Maximize\n");
  os << " obj:";
  if (m.num_cols() > 0) {
    std::vector<int> cols(m.num_cols());
    for (int j = 0; j < m.num_cols(); ++j) cols[j] = j;
    os << " ";
    write_terms(os, cols, m.objective, m);
  }
  if (m.objective_offset != 0.0) {
    os << (m.objective_offset < 0 ? " - " : " + ") << format_number(std::fabs(m.objective_offset));
  }
  os << "\nSubject To\n";
  auto lhs = [&](const std::vector<int>& cols, const std::vector<double>& vals) {
    if (cols.empty()) {
      if (m.num_cols() == 0) throw Error(ErrorCode::kUnrepresentableAnnotation, "empty row in a model without columns");
      os << "0 " << m.col_names[0];
      return;
    }
    write_terms(os, cols, vals, m);
  };
  for (const Row& r : m.rows) {
    os << " " << r.name << ": ";
    lhs(r.cols, r.vals);
    os << " " << rel_text(r.sense) << " " << format_number(r.rhs) << "\n";
  }
  for (const IndicatorRow& ind : m.indicators) {
    os << " " << ind.name << ": " << m.col_names[ind.trigger] << " = " << ind.trigger_value << " -> ";
    lhs(ind.cols, ind.vals);
    os << " " << rel_text(ind.sense) << " " << format_number(ind.rhs) << "\n";
  }
  std::map<int, const SemiContinuous*> semi;
  for (const SemiContinuous& sc : m.semicontinuous) semi[sc.col] = &sc;
  auto is_binary = [&](int j) { return m.integer[j] && m.lower[j] == 0.0 && m.upper[j] == 1.0 && !semi.count(j); };
  std::ostringstream bounds;
  for (int j = 0; j < m.num_cols(); ++j) {
    const std::string& name = m.col_names[j];
    if (auto it = semi.find(j); it != semi.end()) {
      bounds << " " << format_number(it->second->lower) << " <= " << name << " <= "
             << format_number(it->second->upper) << "\n";
      continue;
    }
    if (is_binary(j)) continue;
    double lo = m.lower[j], up = m.upper[j];
    if (lo == 0.0 && !std::signbit(lo) && std::isinf(up) && up > 0) continue;
    if (lo == up) {
      bounds << " " << name << " = " << format_number(lo) << "\n";
    } else {
      bounds << " " << bound_text(lo) << " <= " << name << " <= " << bound_text(up) << "\n";
    }
  }
  if (!bounds.str().empty()) os << "Bounds\n" << bounds.str();
  std::vector<std::string> generals, binaries;
  for (int j = 0; j < m.num_cols(); ++j) {
    if (!m.integer[j]) continue;
    (is_binary(j) ? binaries : generals).push_back(m.col_names[j]);
  }
  auto name_list = [&](const char* header, const std::vector<std::string>& names) {
    if (names.empty()) return;
    os << header << "\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
      os << " " << names[k];
      if (k % kTermsPerLine == kTermsPerLine - 1 || k + 1 == names.size()) os << "\n";
    }
  };
  name_list("Generals", generals);
  name_list("Binaries", binaries);
  std::vector<std::string> semis;
  for (const SemiContinuous& sc : m.semicontinuous) semis.push_back(m.col_names[sc.col]);
  name_list("Semi-continuous", semis);
  if (!m.sos.empty()) {
    os << "SOS\n";
    for (const SosSet& s : m.sos) {
      os << " " << s.name << ": S" << s.type << "::";
      for (std::size_t k = 0; k < s.cols.size(); ++k) {
        os << " " << m.col_names[s.cols[k]] << ":" << format_number(s.weights[k]);
      }
      os << "\n";
    }
  }
  os << "End\n";
  return os.str();
}

namespace {

enum class TokKind { kName, kNumber, kColon, kDoubleColon, kRel, kArrow, kPlus, kMinus, kSection, kEnd };

struct LpToken {
  TokKind kind;
  std::string text;
  double number = 0.0;
  Relation rel = Relation::kLessEqual;
  int line = 0;
  int column = 0;
};

[[noreturn]] void syntax(int line, int column, const std::string& what) {
  throw Error(ErrorCode::kLpSyntaxError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::optional<std::string> section_of(const std::string& trimmed_lower) {
  static const std::map<std::string, std::string> kSections = {
      {"minimize", "min"},   {"minimum", "min"},    {"min", "min"},         {"maximize", "max"},
      {"maximum", "max"},    {"max", "max"},        {"subject to", "st"},   {"such that", "st"},
      {"st", "st"},          {"s.t.", "st"},        {"st.", "st"},          {"bounds", "bounds"},
      {"bound", "bounds"},   {"generals", "gen"},   {"general", "gen"},     {"gen", "gen"},
      {"integers", "gen"},   {"binaries", "bin"},   {"binary", "bin"},      {"bin", "bin"},
      {"semi-continuous", "semi"}, {"semis", "semi"}, {"semi", "semi"},
      {"sos", "sos"},        {"end", "end"}};
  auto it = kSections.find(trimmed_lower);
  if (it == kSections.end()) return std::nullopt;
  return it->second;
}

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("_()[],.{}!\"#$%&;?@'`|~^").find(c) !=
                                                              std::string_view::npos;
}

struct Directives {
  std::string name;
  std::map<std::string, double> big_m;
};

std::vector<LpToken> lex(const std::string& text, Directives& directives) {
  std::vector<LpToken> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '\\') {
      std::string body = line.substr(first + 1);
      if (body.rfind("Problem name:", 0) == 0) {
        std::string n = body.substr(13);
        n.erase(0, n.find_first_not_of(' '));
        directives.name = n;
      } else if (body.rfind("big-M ", 0) == 0) {
        std::istringstream ds(body.substr(6));
        std::string name, value;
        ds >> name >> value;
        try {
          directives.big_m[name] = std::stod(value);
        } catch (const std::logic_error&) {
          syntax(lineno, static_cast<int>(first) + 1, "bad big-M directive");
        }
      }
      continue;
    }
    std::string trimmed = line.substr(first);
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) trimmed.pop_back();
    if (auto sec = section_of(lower(trimmed))) {
      out.push_back(LpToken{TokKind::kSection, *sec, 0.0, Relation::kLessEqual, lineno, static_cast<int>(first) + 1});
      continue;
    }
    std::size_t i = first;
    const std::size_t n = line.size();
    while (i < n) {
      char c = line[i];
      int col = static_cast<int>(i) + 1;
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      if (c == '\\') break;  // trailing comment
      auto push = [&](TokKind k, std::string t, std::size_t len) {
        out.push_back(LpToken{k, std::move(t), 0.0, Relation::kLessEqual, lineno, col});
        i += len;
      };
      if (c == ':' && i + 1 < n && line[i + 1] == ':') { push(TokKind::kDoubleColon, "::", 2); continue; }
      if (c == ':') { push(TokKind::kColon, ":", 1); continue; }
      if (c == '-' && i + 1 < n && line[i + 1] == '>') { push(TokKind::kArrow, "->", 2); continue; }
      if (c == '<' || c == '>' || c == '=') {
        std::size_t len = 1;
        Relation r = Relation::kEqual;
        if (c == '<') r = Relation::kLessEqual;
        if (c == '>') r = Relation::kGreaterEqual;
        char d = i + 1 < n ? line[i + 1] : '\0';
        if (d == '=' || (c == '=' && (d == '<' || d == '>'))) {
          if (c == '=' && d == '<') r = Relation::kLessEqual;
          if (c == '=' && d == '>') r = Relation::kGreaterEqual;
          len = 2;
        }
        push(TokKind::kRel, line.substr(i, len), len);
        out.back().rel = r;
        continue;
      }
      if (c == '+') { push(TokKind::kPlus, "+", 1); continue; }
      if (c == '-') { push(TokKind::kMinus, "-", 1); continue; }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(line.substr(i), &used);
        } catch (const std::logic_error&) {
          syntax(lineno, col, "malformed number");
        }
        out.push_back(LpToken{TokKind::kNumber, line.substr(i, used), v, Relation::kLessEqual, lineno, col});
        i += used;
        continue;
      }
      if (name_char(c)) {
        std::size_t start = i;
        while (i < n && name_char(line[i])) ++i;
        std::string word = line.substr(start, i - start);
        std::string lw = lower(word);
        if (lw == "inf" || lw == "infinity") {
          out.push_back(LpToken{TokKind::kNumber, word, kInfinity, Relation::kLessEqual, lineno, col});
        } else {
          out.push_back(LpToken{TokKind::kName, word, 0.0, Relation::kLessEqual, lineno, col});
        }
        continue;
      }
      syntax(lineno, col, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back(LpToken{TokKind::kEnd, "", 0.0, Relation::kLessEqual, lineno + 1, 1});
  return out;
}

class LpParser {
 public:
  LpParser(std::vector<LpToken> tokens, Directives directives)
      : t_(std::move(tokens)), directives_(std::move(directives)) {}

  GroundModel parse();

 private:
  const LpToken& peek(std::size_t k = 0) const { return t_[std::min(pos_ + k, t_.size() - 1)]; }
  const LpToken& next() { return t_[std::min(pos_++, t_.size() - 1)]; }
  bool at(TokKind k) const { return peek().kind == k; }
  [[noreturn]] void fail(const std::string& what) const { syntax(peek().line, peek().column, what); }
  bool section_end() const { return at(TokKind::kSection) || at(TokKind::kEnd); }
  bool at_label() const { return at(TokKind::kName) && peek(1).kind == TokKind::kColon; }

  int column(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    int j = m_.add_column(name, 0.0, 0.0, kInfinity, false);
    index_[name] = j;
    return j;
  }
  int existing(const LpToken& tok) {
    auto it = index_.find(tok.text);
    if (it == index_.end()) syntax(tok.line, tok.column, "unknown column '" + tok.text + "'");
    return it->second;
  }

  // Linear terms until a relation, arrow, label or section. Constants are
  // accumulated separately.
  void terms(std::vector<int>& cols, std::vector<double>& vals, double& constant, bool stop_at_label);
  double signed_number();
  void objective();
  void constraints();
  void bounds();
  void names(const std::string& kind);
  void sos();

  std::vector<LpToken> t_;
  std::size_t pos_ = 0;
  Directives directives_;
  GroundModel m_;
  std::map<std::string, int> index_;
  std::set<std::string> row_names_;
  std::vector<int> semis_;
};

void LpParser::terms(std::vector<int>& cols, std::vector<double>& vals, double& constant, bool stop_at_label) {
  bool first = true;
  while (true) {
    if (section_end() || at(TokKind::kRel) || at(TokKind::kArrow)) return;
    if (stop_at_label && at_label()) return;
    double sign = 1.0;
    bool had_sign = false;
    while (at(TokKind::kPlus) || at(TokKind::kMinus)) {
      if (next().kind == TokKind::kMinus) sign = -sign;
      had_sign = true;
    }
    if (!first && !had_sign) fail("expected '+' or '-' between terms");
    first = false;
    double coef = 1.0;
    bool have_number = false;
    if (at(TokKind::kNumber)) {
      coef = next().number;
      have_number = true;
    }
    if (at(TokKind::kName) && !(stop_at_label && at_label())) {
      int j = column(next().text);
      double v = sign * coef;
      auto it = std::find(cols.begin(), cols.end(), j);
      if (it != cols.end()) {
        vals[it - cols.begin()] += v;
      } else {
        cols.push_back(j);
        vals.push_back(v);
      }
    } else if (have_number) {
      constant += sign * coef;
    } else {
      fail("expected a term, found '" + peek().text + "'");
    }
  }
}

double LpParser::signed_number() {
  double sign = 1.0;
  while (at(TokKind::kPlus) || at(TokKind::kMinus)) {
    if (next().kind == TokKind::kMinus) sign = -sign;
  }
  if (!at(TokKind::kNumber)) fail("expected a number, found '" + peek().text + "'");
  return sign * next().number;
}

void LpParser::objective() {
  if (at_label()) pos_ += 2;
  std::vector<int> cols;
  std::vector<double> vals;
  double constant = 0.0;
  terms(cols, vals, constant, false);
  for (std::size_t k = 0; k < cols.size(); ++k) m_.objective[cols[k]] += vals[k];
  m_.objective_offset = constant;
}

void LpParser::constraints() {
  int auto_id = 0;
  while (!section_end()) {
    std::string name;
    if (at_label()) {
      name = next().text;
      next();
    } else {
      name = "R" + std::to_string(++auto_id);
    }
    if (!row_names_.insert(name).second) fail("duplicate row name '" + name + "'");
    // Indicator: <binary> = 0|1 -> ...
    if (at(TokKind::kName) && peek(1).kind == TokKind::kRel && peek(1).rel == Relation::kEqual &&
        peek(2).kind == TokKind::kNumber && peek(3).kind == TokKind::kArrow) {
      IndicatorRow ind;
      ind.name = name;
      ind.trigger = column(next().text);
      next();
      const LpToken& v = next();
      if (v.number != 0.0 && v.number != 1.0) syntax(v.line, v.column, "indicator value must be 0 or 1");
      ind.trigger_value = static_cast<int>(v.number);
      next();
      double constant = 0.0;
      terms(ind.cols, ind.vals, constant, true);
      if (!at(TokKind::kRel)) fail("expected a relation");
      ind.sense = next().rel;
      ind.rhs = signed_number() - constant;
      auto it = directives_.big_m.find(name);
      if (it != directives_.big_m.end()) ind.big_m = it->second;
      for (std::size_t k = ind.cols.size(); k-- > 0;) {
        if (ind.vals[k] == 0.0) {
          ind.cols.erase(ind.cols.begin() + static_cast<long>(k));
          ind.vals.erase(ind.vals.begin() + static_cast<long>(k));
        }
      }
      m_.indicators.push_back(std::move(ind));
      continue;
    }
    Row r;
    r.name = name;
    double constant = 0.0;
    terms(r.cols, r.vals, constant, true);
    if (!at(TokKind::kRel)) fail("expected a relation after row '" + name + "'");
    r.sense = next().rel;
    r.rhs = signed_number() - constant;
    for (std::size_t k = r.cols.size(); k-- > 0;) {
      if (r.vals[k] == 0.0) {
        r.cols.erase(r.cols.begin() + static_cast<long>(k));
        r.vals.erase(r.vals.begin() + static_cast<long>(k));
      }
    }
    m_.add_row(std::move(r));
  }
}

void LpParser::bounds() {
  while (!section_end()) {
    if (at(TokKind::kName)) {
      int j = column(next().text);
      if (at(TokKind::kName) && lower(peek().text) == "free") {
        next();
        m_.lower[j] = -kInfinity;
        m_.upper[j] = kInfinity;
        continue;
      }
      if (!at(TokKind::kRel)) fail("expected a relation in bound");
      Relation r = next().rel;
      double v = signed_number();
      if (r == Relation::kEqual) {
        m_.lower[j] = m_.upper[j] = v;
      } else if (r == Relation::kLessEqual) {
        m_.upper[j] = v;
      } else {
        m_.lower[j] = v;
      }
      continue;
    }
    double lo = signed_number();
    if (!at(TokKind::kRel)) fail("expected a relation in bound");
    Relation r1 = next().rel;
    if (!at(TokKind::kName)) fail("expected a column name in bound");
    int j = column(next().text);
    if (r1 == Relation::kEqual) {
      m_.lower[j] = m_.upper[j] = lo;
      continue;
    }
    if (r1 == Relation::kLessEqual) {
      m_.lower[j] = lo;
    } else {
      m_.upper[j] = lo;
    }
    if (at(TokKind::kRel)) {
      Relation r2 = next().rel;
      double hi = signed_number();
      if (r2 == Relation::kLessEqual) {
        m_.upper[j] = hi;
      } else if (r2 == Relation::kGreaterEqual) {
        m_.lower[j] = hi;
      } else {
        fail("'=' in a two-sided bound");
      }
    }
  }
}

void LpParser::names(const std::string& kind) {
  while (!section_end()) {
    if (!at(TokKind::kName)) fail("expected a column name");
    int j = column(next().text);
    if (kind == "gen") {
      m_.integer[j] = true;
    } else if (kind == "bin") {
      m_.integer[j] = true;
      m_.lower[j] = 0.0;
      m_.upper[j] = 1.0;
    } else {
      if (std::find(semis_.begin(), semis_.end(), j) == semis_.end()) semis_.push_back(j);
    }
  }
}

void LpParser::sos() {
  while (!section_end()) {
    if (!at_label()) fail("expected an SOS name");
    SosSet s;
    s.name = next().text;
    next();
    if (!at(TokKind::kName) || (peek().text != "S1" && peek().text != "S2" && peek().text != "s1" &&
                                peek().text != "s2")) {
      fail("expected S1 or S2");
    }
    s.type = peek().text[1] - '0';
    next();
    if (!at(TokKind::kDoubleColon)) fail("expected '::'");
    next();
    while (at(TokKind::kName) && peek(1).kind == TokKind::kColon && peek(2).kind != TokKind::kName) {
      s.cols.push_back(existing(next()));
      next();
      s.weights.push_back(signed_number());
    }
    m_.sos.push_back(std::move(s));
  }
}

GroundModel LpParser::parse() {
  m_.name = directives_.name;
  bool seen_objective = false;
  while (!at(TokKind::kEnd)) {
    if (!at(TokKind::kSection)) fail("expected a section keyword, found '" + peek().text + "'");
    std::string sec = next().text;
    if (sec == "end") break;
    if (sec == "min" || sec == "max") {
      if (seen_objective) fail("second objective section");
      seen_objective = true;
      m_.sense = sec == "min" ? Sense::kMinimize : Sense::kMaximize;
      objective();
    } else if (sec == "st") {
      constraints();
    } else if (sec == "bounds") {
      bounds();
    } else if (sec == "gen" || sec == "bin" || sec == "semi") {
      names(sec);
    } else if (sec == "sos") {
      sos();
    }
  }
  if (!seen_objective) fail("missing objective section");
  for (int j : semis_) {
    SemiContinuous sc{j, m_.lower[j], m_.upper[j]};
    m_.lower[j] = 0.0;
    m_.semicontinuous.push_back(sc);
  }
  try {
    m_.check();
  } catch (const Error& e) {
    throw Error(ErrorCode::kLpSyntaxError, std::string("line 1, column 1: ") + e.what());
  }
  return std::move(m_);
}

}  // namespace

GroundModel parse_lp(const std::string& text) {
  Directives d;
  auto tokens = lex(text, d);
  return LpParser(std::move(tokens), std::move(d)).parse();
}

GroundModel read_lp_file(const std::string& path) { return parse_lp(json_util::read_text(path)); }

}  // namespace nlmilp
