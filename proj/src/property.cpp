#include "qnnv/property.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "qnnv/error.hpp"

namespace qnnv {

std::string_view to_string(Comparator cmp) {
  switch (cmp) {
  case Comparator::lt: return "<";
  case Comparator::le: return "<=";
  case Comparator::gt: return ">";
  case Comparator::ge: return ">=";
  }
  return "?";
}

void Property::validate(std::size_t input_dim, std::size_t output_dim) const {
  auto check = [&](const LinearConstraint& c) {
    for (const Term& t : c.terms) {
      const std::size_t limit = t.var.tier == Tier::input ? input_dim : output_dim;
      if (t.var.index >= limit) {
        throw DimensionError(std::string(t.var.tier == Tier::input ? "x[" : "y[") +
                             std::to_string(t.var.index) + "] is out of range (model has " +
                             std::to_string(limit) +
                             (t.var.tier == Tier::input ? " inputs)" : " outputs)"));
      }
    }
  };
  for (const auto& c : assumes) check(c);
  for (const auto& c : asserts) check(c);
  if (asserts.empty()) throw DimensionError("property '" + name + "' has no assert");
}

// ---------------------------------------------------------------------------
// DSL parser

namespace {

enum class Tok { ident, number, lbracket, rbracket, plus, minus, star, cmp, semi, andand, end };

struct Token {
  Tok kind;
  std::string_view text;
  std::size_t line;
  std::size_t column;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space();
    const std::size_t line = line_;
    const std::size_t col = col_;
    if (pos_ >= src_.size()) return {Tok::end, {}, line, col};
    const char c = src_[pos_];
    const std::size_t start = pos_;
    auto single = [&](Tok k) {
      advance();
      return Token{k, src_.substr(start, 1), line, col};
    };
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        advance();
      }
      return {Tok::ident, src_.substr(start, pos_ - start), line, col};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
        advance();
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t look = pos_ + 1;
        if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
        if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
          while (pos_ < look) advance();
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            advance();
          }
        }
      }
      return {Tok::number, src_.substr(start, pos_ - start), line, col};
    }
    switch (c) {
    case '[': return single(Tok::lbracket);
    case ']': return single(Tok::rbracket);
    case '+': return single(Tok::plus);
    case '-': return single(Tok::minus);
    case '*': return single(Tok::star);
    case ';': return single(Tok::semi);
    case '<':
    case '>':
      advance();
      if (pos_ < src_.size() && src_[pos_] == '=') advance();
      return {Tok::cmp, src_.substr(start, pos_ - start), line, col};
    case '&':
      advance();
      if (pos_ < src_.size() && src_[pos_] == '&') {
        advance();
        return {Tok::andand, src_.substr(start, 2), line, col};
      }
      break;
    default:
      break;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }

private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

struct Side {
  std::vector<Term> terms;
  double constant = 0.0;
};

class Parser {
public:
  explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.next(); }

  Property parse(std::string name) {
    Property p;
    p.name = std::move(name);
    while (tok_.kind != Tok::end) {
      if (tok_.kind != Tok::ident || (tok_.text != "assume" && tok_.text != "assert")) {
        fail("expected 'assume' or 'assert'");
      }
      const bool is_assume = tok_.text == "assume";
      shift();
      while (true) {
        const Token start = tok_;
        LinearConstraint c = constraint();
        const Tier forbidden = is_assume ? Tier::output : Tier::input;
        for (const Term& t : c.terms) {
          if (t.var.tier == forbidden) {
            throw ParseError(is_assume ? "assumes may only constrain inputs x[i]"
                                       : "asserts may only constrain outputs y[j]",
                             start.line, start.column);
          }
        }
        (is_assume ? p.assumes : p.asserts).push_back(std::move(c));
        if (tok_.kind != Tok::andand) break;
        shift();
      }
      expect(Tok::semi, "';'");
    }
    if (p.asserts.empty()) {
      throw ParseError("property needs at least one assert", tok_.line, tok_.column);
    }
    return p;
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    const std::string got = tok_.kind == Tok::end ? "end of input" : "'" + std::string(tok_.text) + "'";
    throw ParseError(what + ", got " + got, tok_.line, tok_.column);
  }

  void shift() { tok_ = lex_.next(); }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) fail(std::string("expected ") + what);
    shift();
  }

  double number() {
    std::string_view t = tok_.text;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
      fail("malformed number");
    }
    shift();
    return v;
  }

  std::optional<VarRef> variable() {
    if (tok_.kind != Tok::ident) return std::nullopt;
    if (tok_.text != "x" && tok_.text != "y") fail("expected variable x[i] or y[j]");
    const Tier tier = tok_.text == "x" ? Tier::input : Tier::output;
    shift();
    expect(Tok::lbracket, "'['");
    if (tok_.kind != Tok::number) fail("expected an index");
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(tok_.text.data(), tok_.text.data() + tok_.text.size(), index);
    if (ec != std::errc() || ptr != tok_.text.data() + tok_.text.size()) fail("malformed index");
    shift();
    expect(Tok::rbracket, "']'");
    return VarRef{tier, index};
  }

  void add_term(Side& side, double coeff, VarRef var) {
    for (Term& t : side.terms) {
      if (t.var == var) {
        t.coeff += coeff;
        return;
      }
    }
    side.terms.push_back({coeff, var});
  }

  Side sum() {
    Side side;
    bool first = true;
    while (true) {
      double sign = 1.0;
      if (tok_.kind == Tok::plus || tok_.kind == Tok::minus) {
        sign = tok_.kind == Tok::minus ? -1.0 : 1.0;
        shift();
      } else if (!first) {
        break;
      }
      first = false;
      if (tok_.kind == Tok::number) {
        const double v = number();
        if (tok_.kind == Tok::star) {
          shift();
          const auto var = variable();
          if (!var) fail("expected variable after '*'");
          add_term(side, sign * v, *var);
        } else if (const auto var = variable()) {
          add_term(side, sign * v, *var);
        } else {
          side.constant += sign * v;
        }
      } else if (const auto var = variable()) {
        add_term(side, sign, *var);
      } else {
        fail("expected a number or variable");
      }
    }
    return side;
  }

  LinearConstraint constraint() {
    const Token start = tok_;
    Side lhs = sum();
    if (tok_.kind != Tok::cmp) fail("expected comparison operator");
    Comparator cmp = Comparator::lt;
    if (tok_.text == "<") cmp = Comparator::lt;
    else if (tok_.text == "<=") cmp = Comparator::le;
    else if (tok_.text == ">") cmp = Comparator::gt;
    else cmp = Comparator::ge;
    shift();
    Side rhs = sum();

    for (const Term& t : rhs.terms) add_term(lhs, -t.coeff, t.var);
    LinearConstraint c;
    c.cmp = cmp;
    c.bound = rhs.constant - lhs.constant;
    for (const Term& t : lhs.terms) {
      if (t.coeff != 0.0) c.terms.push_back(t);
    }
    if (c.terms.empty()) {
      throw ParseError("constraint mentions no variable", start.line, start.column);
    }
    return c;
  }

  Lexer lex_;
  Token tok_;
};

std::string number_text(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

} // namespace

Property parse_property(std::string_view text, std::string name) {
  return Parser(text).parse(std::move(name));
}

Property parse_property(std::string_view text, std::size_t input_dim, std::size_t output_dim,
                        std::string name) {
  Property p = parse_property(text, std::move(name));
  p.validate(input_dim, output_dim);
  return p;
}

std::string to_dsl(const Property& p) {
  std::ostringstream out;
  auto write = [&](const char* kw, const LinearConstraint& c) {
    out << kw << ' ';
    for (std::size_t i = 0; i < c.terms.size(); ++i) {
      const Term& t = c.terms[i];
      double mag = t.coeff;
      if (i > 0) {
        out << (t.coeff < 0 ? " - " : " + ");
        mag = std::fabs(t.coeff);
      }
      if (mag == -1.0) {
        out << '-';
      } else if (mag != 1.0) {
        out << number_text(mag) << '*';
      }
      out << (t.var.tier == Tier::input ? 'x' : 'y') << '[' << t.var.index << ']';
    }
    out << ' ' << to_string(c.cmp) << ' ' << number_text(c.bound) << ";\n";
  };
  for (const auto& c : p.assumes) write("assume", c);
  for (const auto& c : p.asserts) write("assert", c);
  return out.str();
}

Property robustness_property(std::span<const double> x0, double radius, std::size_t target_class,
                             std::size_t num_outputs, std::string name) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw DimensionError("robustness radius must be a finite non-negative number");
  }
  if (target_class >= num_outputs) {
    throw DimensionError("target class " + std::to_string(target_class) + " is not below " +
                         std::to_string(num_outputs) + " outputs");
  }
  Property p;
  p.name = std::move(name);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    p.assumes.push_back({{{1.0, {Tier::input, i}}}, Comparator::ge, x0[i] - radius});
    p.assumes.push_back({{{1.0, {Tier::input, i}}}, Comparator::le, x0[i] + radius});
  }
  for (std::size_t j = 0; j < num_outputs; ++j) {
    if (j == target_class) continue;
    p.asserts.push_back(
        {{{1.0, {Tier::output, target_class}}, {-1.0, {Tier::output, j}}}, Comparator::gt, 0.0});
  }
  return p;
}

Interval quant_range(const QuantFormat& format) {
  if (const auto* cfg = std::get_if<FxpConfig>(&format)) {
    return {cfg->min_value(), cfg->max_value()};
  }
  const double m = std::numeric_limits<float>::max();
  return {-m, m};
}

namespace {

struct Bound1 {
  double value;
  bool strict;
  bool lower;
};

std::optional<Bound1> single_variable_bound(const LinearConstraint& c) {
  const double coeff = c.terms[0].coeff;
  double q = c.bound / coeff;
  const bool exact = std::isfinite(q) && std::fma(q, coeff, -c.bound) == 0.0;
  bool lower = c.cmp == Comparator::gt || c.cmp == Comparator::ge;
  if (coeff < 0) lower = !lower;
  const bool strict = c.cmp == Comparator::lt || c.cmp == Comparator::gt;
  if (!exact) {
    q = std::nextafter(q, lower ? -std::numeric_limits<double>::infinity()
                                : std::numeric_limits<double>::infinity());
  }
  if (std::isnan(q)) return std::nullopt;
  return Bound1{q, strict, lower};
}

float float_at_or_above(double v) {
  float f = static_cast<float>(v);
  if (static_cast<double>(f) < v) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

float float_at_or_below(double v) {
  float f = static_cast<float>(v);
  if (static_cast<double>(f) > v) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
  return f;
}

} // namespace

Box extract_box(const Property& p, std::size_t input_dim, const QuantFormat& format) {
  const auto* cfg = std::get_if<FxpConfig>(&format);
  struct RawBox {
    int128 lo;
    int128 hi;
  };
  std::vector<RawBox> raw;
  Box box(input_dim, quant_range(format));
  if (cfg) raw.assign(input_dim, RawBox{cfg->min_raw(), cfg->max_raw()});

  for (const LinearConstraint& c : p.assumes) {
    if (c.terms.size() != 1 || c.terms[0].var.tier != Tier::input) continue;
    const std::size_t i = c.terms[0].var.index;
    if (i >= input_dim) {
      throw DimensionError("x[" + std::to_string(i) + "] is out of range");
    }
    const auto b = single_variable_bound(c);
    if (!b) continue;
    if (cfg) {
      const int f = cfg->frac_bits;
      if (b->lower) {
        const int128 r = b->strict ? static_cast<int128>(fxp::floor_raw(b->value, f)) + 1
                                   : static_cast<int128>(fxp::ceil_raw(b->value, f));
        raw[i].lo = std::max(raw[i].lo, r);
      } else {
        const int128 r = b->strict ? static_cast<int128>(fxp::ceil_raw(b->value, f)) - 1
                                   : static_cast<int128>(fxp::floor_raw(b->value, f));
        raw[i].hi = std::min(raw[i].hi, r);
      }
    } else {
      if (b->lower) {
        float f = float_at_or_above(b->value);
        if (b->strict && static_cast<double>(f) == b->value) {
          f = std::nextafter(f, std::numeric_limits<float>::infinity());
        }
        box[i].lo = std::max(box[i].lo, static_cast<double>(f));
      } else {
        float f = float_at_or_below(b->value);
        if (b->strict && static_cast<double>(f) == b->value) {
          f = std::nextafter(f, -std::numeric_limits<float>::infinity());
        }
        box[i].hi = std::min(box[i].hi, static_cast<double>(f));
      }
    }
  }

  for (std::size_t i = 0; i < input_dim; ++i) {
    if (cfg) {
      if (raw[i].lo > raw[i].hi) {
        throw VacuousProperty("assumes on x[" + std::to_string(i) + "] admit no value");
      }
      box[i] = {fxp::raw_to_double_down(static_cast<std::int64_t>(raw[i].lo), cfg->frac_bits),
                fxp::raw_to_double_up(static_cast<std::int64_t>(raw[i].hi), cfg->frac_bits)};
    } else if (!(box[i].lo <= box[i].hi)) {
      throw VacuousProperty("assumes on x[" + std::to_string(i) + "] admit no value");
    }
  }
  return box;
}

} // namespace qnnv
