#include <cctype>
#include <variant>

#include "qnnv/encoder.hpp"
#include "qnnv/error.hpp"
#include "qnnv/interpreter.hpp"

namespace qnnv {

namespace {

struct SExpr {
  std::string atom; // empty for lists
  std::vector<SExpr> items;
  bool is_list = false;
};

class SExprReader {
public:
  explicit SExprReader(std::string_view text) : text_(text) {}

  std::vector<SExpr> read_all() {
    std::vector<SExpr> out;
    skip();
    while (pos_ < text_.size()) {
      out.push_back(read());
      skip();
    }
    return out;
  }

private:
  void skip() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  SExpr read() {
    skip();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of solver output", line_, col_);
    const char c = text_[pos_];
    if (c == ')') throw ParseError("unbalanced ')' in solver output", line_, col_);
    if (c == '(') {
      advance();
      SExpr list;
      list.is_list = true;
      for (;;) {
        skip();
        if (pos_ >= text_.size()) throw ParseError("unterminated list in solver output", line_, col_);
        if (text_[pos_] == ')') {
          advance();
          return list;
        }
        list.items.push_back(read());
      }
    }
    SExpr atom;
    if (c == '"' || c == '|') {
      const char close = c;
      atom.atom.push_back(c);
      advance();
      while (pos_ < text_.size() && text_[pos_] != close) {
        atom.atom.push_back(text_[pos_]);
        advance();
      }
      if (pos_ >= text_.size()) throw ParseError("unterminated quoted atom", line_, col_);
      atom.atom.push_back(close);
      advance();
      return atom;
    }
    while (pos_ < text_.size()) {
      const char d = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(d)) || d == '(' || d == ')') break;
      atom.atom.push_back(d);
      advance();
    }
    return atom;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

bool is_atom(const SExpr& e, std::string_view s) { return !e.is_list && e.atom == s; }

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '|' && s.back() == '|') return s.substr(1, s.size() - 2);
  return s;
}

/// Bits of a literal: value and width.
struct Bits {
  std::uint64_t value = 0;
  int width = 0;
};

std::optional<Bits> digits_literal(const std::string& a) {
  if (a.size() < 3 || a[0] != '#') return std::nullopt;
  const int radix = a[1] == 'x' ? 16 : a[1] == 'b' ? 2 : 0;
  if (radix == 0) return std::nullopt;
  const int per_digit = radix == 16 ? 4 : 1;
  const int width = static_cast<int>(a.size() - 2) * per_digit;
  if (width > 64) throw ParseError("bit-vector literal wider than 64 bits: " + a);
  std::uint64_t v = 0;
  for (std::size_t i = 2; i < a.size(); ++i) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(a[i])));
    int d;
    if (c >= '0' && c <= '9') {
      d = c - '0';
    } else if (c >= 'a' && c <= 'f') {
      d = c - 'a' + 10;
    } else {
      throw ParseError("malformed bit-vector literal " + a);
    }
    if (d >= radix) throw ParseError("malformed bit-vector literal " + a);
    v = (v << per_digit) | static_cast<std::uint64_t>(d);
  }
  return Bits{v, width};
}

/// Returns nullopt for terms that are not literals (e.g. z3 echoing a
/// definition body in get-model).
std::optional<Bits> literal(const SExpr& e) {
  if (!e.is_list) return digits_literal(e.atom);
  const auto& it = e.items;
  if (it.size() == 3 && is_atom(it[0], "_") && !it[1].is_list && it[1].atom.rfind("bv", 0) == 0 &&
      !it[2].is_list) {
    try {
      const int width = std::stoi(it[2].atom);
      if (width > 64) throw ParseError("bit-vector literal wider than 64 bits");
      return Bits{std::stoull(it[1].atom.substr(2)), width};
    } catch (const std::logic_error&) {
      throw ParseError("malformed bit-vector literal (_ " + it[1].atom + " " + it[2].atom + ")");
    }
  }
  if (it.size() == 4 && is_atom(it[0], "fp")) {
    const auto s = literal(it[1]);
    const auto ex = literal(it[2]);
    const auto m = literal(it[3]);
    if (!s || !ex || !m || s->width != 1 || ex->width + m->width + 1 > 64) {
      throw ParseError("malformed floating-point literal");
    }
    return Bits{(s->value << (ex->width + m->width)) | (ex->value << m->width) | m->value,
                1 + ex->width + m->width};
  }
  if (it.size() == 4 && is_atom(it[0], "_") && !it[1].is_list && it[2].atom == "8" && it[3].atom == "24") {
    const std::string& k = it[1].atom;
    if (k == "+zero") return Bits{0x00000000u, 32};
    if (k == "-zero") return Bits{0x80000000u, 32};
    if (k == "+oo") return Bits{0x7f800000u, 32};
    if (k == "-oo") return Bits{0xff800000u, 32};
    if (k == "NaN") return Bits{0x7fc00000u, 32};
  }
  return std::nullopt;
}

void collect(const SExpr& e, SolverModel& out) {
  if (!e.is_list) return;
  const auto& it = e.items;
  // (define-fun name () sort value)
  if (it.size() == 5 && is_atom(it[0], "define-fun") && !it[1].is_list) {
    if (const auto b = literal(it[4])) out[unquote(it[1].atom)] = b->value;
    return;
  }
  // (= name value)
  if (it.size() == 3 && is_atom(it[0], "=") && !it[1].is_list) {
    if (const auto b = literal(it[2])) out[unquote(it[1].atom)] = b->value;
    return;
  }
  // (name value) from get-value
  if (it.size() == 2 && !it[0].is_list && !is_atom(it[0], "model")) {
    if (const auto b = literal(it[1])) {
      out[unquote(it[0].atom)] = b->value;
      return;
    }
  }
  for (const SExpr& child : it) collect(child, out);
}

} // namespace

SolverModel parse_solver_model(std::string_view text) {
  SolverModel out;
  for (const SExpr& e : SExprReader(text).read_all()) collect(e, out);
  return out;
}

Counterexample decode_model(const SmtScript& script, std::string_view solver_model) {
  if (!script.problem) throw DecodeError("script carries no problem for replay");
  SolverModel model;
  try {
    model = parse_solver_model(solver_model);
  } catch (const ParseError& e) {
    throw DecodeError(std::string("unparseable solver model: ") + e.what());
  }
  const Problem& pr = *script.problem;
  const auto* cfg = std::get_if<FxpConfig>(&pr.format);
  std::vector<QuantValue> x;
  for (const std::string& sym : script.inputs) {
    const auto it = model.find(sym);
    if (it == model.end()) throw DecodeError("solver model has no value for input " + sym);
    std::uint64_t bits = it->second;
    if (cfg) {
      const int w = cfg->width();
      if (w < 64) {
        if (bits >> w) throw DecodeError("value of " + sym + " exceeds " + std::to_string(w) + " bits");
        if ((bits >> (w - 1)) & 1) bits |= ~std::uint64_t{0} << w;
      }
      x.push_back(from_raw(static_cast<std::int64_t>(bits), pr.format));
    } else {
      if (bits >> 32) throw DecodeError("value of " + sym + " exceeds 32 bits");
      x.push_back(from_raw(static_cast<std::int64_t>(bits), pr.format));
    }
  }
  Counterexample cex;
  cex.input_values = x;
  cex.trace = Interpreter(pr.model, pr.format, pr.luts).run(x);
  const PropertyCheck check = check_property(pr.property, cex.trace, pr.format);
  cex.violated_assert = check.violated_assert.value_or(script.goal_assert.value_or(0));
  return cex;
}

std::optional<std::string> validate_counterexample(const Problem& problem, const Counterexample& cex) {
  const Trace replay = Interpreter(problem.model, problem.format, problem.luts).run(cex.input_values);
  // compare bit patterns: a NaN value never equals itself
  auto same = [](const std::vector<std::vector<QuantValue>>& a, const std::vector<std::vector<QuantValue>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t l = 0; l < a.size(); ++l) {
      if (a[l].size() != b[l].size()) return false;
      for (std::size_t n = 0; n < a[l].size(); ++n) {
        if (a[l][n].raw != b[l][n].raw) return false;
      }
    }
    return true;
  };
  if (!same(replay.pre, cex.trace.pre) || !same(replay.post, cex.trace.post)) {
    return "recorded trace differs from interpreter replay";
  }
  const auto& y = replay.outputs();
  for (std::size_t i = 0; i < problem.property.assumes.size(); ++i) {
    if (!holds(problem.property.assumes[i], replay.inputs, y, problem.format)) {
      return "witness violates assume " + std::to_string(i);
    }
  }
  if (cex.violated_assert >= problem.property.asserts.size()) return "violated assert index out of range";
  if (holds(problem.property.asserts[cex.violated_assert], replay.inputs, y, problem.format)) {
    return "witness satisfies assert " + std::to_string(cex.violated_assert);
  }
  return std::nullopt;
}

} // namespace qnnv
