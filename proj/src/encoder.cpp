#include "qnnv/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "qnnv/error.hpp"
#include "qnnv/interpreter.hpp"

namespace qnnv {

using boost::multiprecision::cpp_int;

std::string_view to_string(Logic logic) { return logic == Logic::qf_bv ? "QF_BV" : "QF_FPBV"; }

std::string input_symbol(std::size_t i) { return "in_" + std::to_string(i); }

std::string neuron_symbol(std::size_t layer, std::size_t neuron, SymbolKind kind) {
  return "l" + std::to_string(layer + 1) + "_n" + std::to_string(neuron) +
         (kind == SymbolKind::pre ? "_u" : "_y");
}

std::string SmtScript::render(const RenderOptions& options) const {
  std::ostringstream out;
  out << "(set-option :produce-models true)\n";
  out << "(set-logic " << to_string(logic) << ")\n";
  for (const auto& s : declarations) out << s << '\n';
  for (const auto& s : definitions) out << s << '\n';
  for (const auto& s : assumptions) out << s << '\n';
  for (const auto& s : invariants) out << s << '\n';
  for (const auto& s : options.extra_asserts) out << "(assert " << s << ")\n";
  if (options.goal) {
    if (goal_terms.size() == 1) {
      out << "(assert " << goal_terms[0] << ")\n";
    } else {
      out << "(assert (or";
      for (const auto& g : goal_terms) out << "\n  " << g;
      out << "))\n";
    }
  }
  out << "(check-sat)\n";
  if (!options.get_values.empty()) {
    out << "(get-value (";
    for (std::size_t i = 0; i < options.get_values.size(); ++i) {
      out << (i ? " " : "") << options.get_values[i];
    }
    out << "))\n";
  }
  if (options.get_model) out << "(get-model)\n";
  return out.str();
}

namespace {

std::string bv_sort(int width) { return "(_ BitVec " + std::to_string(width) + ")"; }

/// Two's-complement literal of v in `width` bits.
std::string bv_const(const cpp_int& v, int width) {
  const cpp_int modulus = cpp_int(1) << width;
  cpp_int u = v % modulus;
  if (u < 0) u += modulus;
  return "(_ bv" + u.str() + " " + std::to_string(width) + ")";
}

std::string hex32(std::uint32_t bits) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#x%08x", bits);
  return buf;
}

std::string fp_const(float f) { return "((_ to_fp 8 24) " + hex32(std::bit_cast<std::uint32_t>(f)) + ")"; }

constexpr const char* fp_zero = "(_ +zero 8 24)";

float float_at_or_below(double v) {
  float f = static_cast<float>(v);
  if (static_cast<double>(f) > v) f = std::nextafter(f, -std::numeric_limits<float>::infinity());
  return f;
}

float float_at_or_above(double v) {
  float f = static_cast<float>(v);
  if (static_cast<double>(f) < v) f = std::nextafter(f, std::numeric_limits<float>::infinity());
  return f;
}

/// Sample selection of a table restricted to merged runs of equal outputs.
/// Values up to thresholds[k] (inclusive) select outputs[k]; above the last
/// threshold, outputs.back().
template <typename T>
struct Segments {
  std::vector<T> thresholds;
  std::vector<T> outputs;
};

Segments<std::int64_t> fxp_segments(const LookupTable& t, const FxpConfig& cfg) {
  const std::size_t first = index_of_raw(t, cfg.min_raw(), cfg.frac_bits);
  const std::size_t last = index_of_raw(t, cfg.max_raw(), cfg.frac_bits);
  Segments<std::int64_t> s;
  for (std::size_t k = first; k <= last; ++k) {
    const std::int64_t out = fxp::quantize(t.samples()[k].output, cfg);
    if (!s.outputs.empty() && s.outputs.back() == out) {
      s.thresholds.pop_back();
    } else {
      s.outputs.push_back(out);
    }
    if (k < last) s.thresholds.push_back(raw_threshold(t.midpoints()[k], cfg.frac_bits));
  }
  return s;
}

Segments<float> float_segments(const LookupTable& t) {
  Segments<float> s;
  const auto& samples = t.samples();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const float out = static_cast<float>(samples[k].output);
    if (!s.outputs.empty() && std::bit_cast<std::uint32_t>(s.outputs.back()) ==
                                  std::bit_cast<std::uint32_t>(out)) {
      s.thresholds.pop_back();
    } else {
      s.outputs.push_back(out);
    }
    // for float u: u <= m (in double) iff u <= the largest float not above m
    if (k + 1 < samples.size()) s.thresholds.push_back(float_at_or_below(t.midpoints()[k]));
  }
  return s;
}

/// Balanced comparison tree over segments [lo, hi].
template <typename T, typename Le, typename Lit>
std::string select_tree(const Segments<T>& s, std::size_t lo, std::size_t hi, const Le& le,
                        const Lit& lit) {
  if (lo == hi) return lit(s.outputs[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  return "(ite " + le(s.thresholds[mid]) + " " + select_tree(s, lo, mid, le, lit) + " " +
         select_tree(s, mid + 1, hi, le, lit) + ")";
}

/// A double as odd_mantissa * 2^exponent (mantissa 0 for zero).
struct Dyadic {
  cpp_int mantissa;
  int exponent = 0;
};

Dyadic dyadic(double v) {
  if (v == 0.0) return {0, 0};
  int e = 0;
  const double m = std::frexp(v, &e);
  auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  e -= 53;
  while ((mant & 1) == 0) {
    mant /= 2;
    ++e;
  }
  return {cpp_int(mant), e};
}

std::size_t bit_length(const cpp_int& v) {
  const cpp_int a = v < 0 ? cpp_int(-v) : v;
  return a == 0 ? 0 : boost::multiprecision::msb(a) + 1;
}

constexpr std::size_t max_constraint_width = 8192;

class Builder {
public:
  Builder(const ModelIR& model, const QuantFormat& format, const LutSet& luts, const Property& p,
          const InvariantMap* invariants, const EncodeOptions& options)
      : model_(model), format_(format), luts_(luts), p_(p), inv_(invariants), options_(options),
        cfg_(std::get_if<FxpConfig>(&format)) {}

  SmtScript build() {
    p_.validate(model_.input_dim(), model_.output_dim());
    if (p_.asserts.empty()) throw EncodeError("property has no assert");
    if (options_.only_assert && *options_.only_assert >= p_.asserts.size()) {
      throw EncodeError("assert index " + std::to_string(*options_.only_assert) + " out of range");
    }
    if (cfg_) cfg_->validate();
    s_.logic = cfg_ ? Logic::qf_bv : Logic::qf_fpbv;
    s_.problem = std::make_shared<const Problem>(Problem{model_, format_, luts_, p_});

    declare_inputs();
    std::vector<std::string> current = s_.inputs;
    if (!cfg_) {
      for (std::size_t i = 0; i < current.size(); ++i) {
        const std::string f = current[i] + "_fp";
        s_.definitions.push_back("(define-fun " + f + " () (_ FloatingPoint 8 24) ((_ to_fp 8 24) " +
                                 current[i] + "))");
        current[i] = f;
      }
    }
    for (std::size_t l = 0; l < model_.layers().size(); ++l) current = encode_layer(l, current);
    if (!cfg_) declare_output_bits();

    for (const auto& c : p_.assumes) s_.assumptions.push_back("(assert " + constraint(c) + ")");
    if (inv_) encode_invariants();
    for (std::size_t i = 0; i < p_.asserts.size(); ++i) {
      if (options_.only_assert && *options_.only_assert != i) continue;
      s_.goal_terms.push_back("(not " + constraint(p_.asserts[i]) + ")");
    }
    s_.goal_assert = options_.only_assert;
    return std::move(s_);
  }

private:
  int width() const { return cfg_ ? cfg_->width() : 32; }

  void define(const std::string& name, const std::string& sort, const std::string& body) {
    s_.definitions.push_back("(define-fun " + name + " () " + sort + " " + body + ")");
  }

  void declare_inputs() {
    for (std::size_t i = 0; i < model_.input_dim(); ++i) {
      const std::string name = input_symbol(i);
      s_.declarations.push_back("(declare-const " + name + " " + bv_sort(width()) + ")");
      s_.inputs.push_back(name);
      s_.symbol_table[name] = {SymbolKind::input, 0, i};
      if (!cfg_) {
        s_.assumptions.push_back("(assert (not (= ((_ extract 30 23) " + name + ") #xff)))");
      }
    }
  }

  std::vector<std::string> encode_layer(std::size_t l, const std::vector<std::string>& in) {
    const DenseLayer& layer = model_.layers()[l];
    const LookupTable* lut = luts_.find(layer.activation());
    if ((layer.activation() == Activation::sigmoid || layer.activation() == Activation::tanh) && !lut) {
      throw EncodeError("no lookup table supplied for activation '" +
                        std::string(to_string(layer.activation())) + "'");
    }
    std::vector<std::string> out;
    for (std::size_t j = 0; j < layer.rows(); ++j) {
      const std::string u = neuron_symbol(l, j, SymbolKind::pre);
      const std::string y = neuron_symbol(l, j, SymbolKind::post);
      const std::string base = "l" + std::to_string(l + 1) + "_n" + std::to_string(j);
      if (cfg_) {
        define(u, bv_sort(width()), fxp_potential(base, layer.row(j), in, layer.bias()[j]));
        define(y, bv_sort(width()), fxp_activation(layer.activation(), u, lut));
      } else {
        define(u, "(_ FloatingPoint 8 24)", float_potential(base, layer.row(j), in, layer.bias()[j]));
        define(y, "(_ FloatingPoint 8 24)", float_activation(layer.activation(), u, lut));
      }
      s_.symbol_table[u] = {SymbolKind::pre, l, j};
      s_.symbol_table[y] = {SymbolKind::post, l, j};
      out.push_back(y);
    }
    return out;
  }

  // Fixed point ------------------------------------------------------------

  std::string fxp_mult(const std::string& base, std::int64_t w, const std::string& x) {
    const int W = width();
    const int F = cfg_->frac_bits;
    const std::string wide = bv_sort(2 * W);
    const std::string p = base + "_p";
    define(p, wide, "(bvmul ((_ sign_extend " + std::to_string(W) + ") " + x + ") " +
                        bv_const(w, 2 * W) + ")");
    std::string q = p;
    if (F > 0) {
      const std::string shifted = "(bvashr " + p + " " + bv_const(F, 2 * W) + ")";
      if (cfg_->rounding == Rounding::floor) {
        q = shifted;
      } else {
        const std::string rem = "((_ extract " + std::to_string(F - 1) + " 0) " + p + ")";
        const std::string half = bv_const(cpp_int(1) << (F - 1), F);
        const std::string odd = "(= ((_ extract " + std::to_string(F) + " " + std::to_string(F) +
                                ") " + p + ") #b1)";
        q = "(ite (or (bvugt " + rem + " " + half + ") (and (= " + rem + " " + half + ") " + odd +
            ")) (bvadd " + shifted + " " + bv_const(1, 2 * W) + ") " + shifted + ")";
      }
      define(base + "_q", wide, q);
      q = base + "_q";
    }
    return narrow(q, 2 * W);
  }

  /// Reduces a `from`-bit signed term to the format width.
  std::string narrow(const std::string& v, int from) {
    const int W = width();
    const std::string low = "((_ extract " + std::to_string(W - 1) + " 0) " + v + ")";
    if (cfg_->overflow == Overflow::wrap) return low;
    return "(ite (bvsgt " + v + " " + bv_const(cfg_->max_raw(), from) + ") " +
           bv_const(cfg_->max_raw(), W) + " (ite (bvslt " + v + " " + bv_const(cfg_->min_raw(), from) +
           ") " + bv_const(cfg_->min_raw(), W) + " " + low + "))";
  }

  std::string fxp_add(const std::string& base, const std::string& a, const std::string& b) {
    if (cfg_->overflow == Overflow::wrap) return "(bvadd " + a + " " + b + ")";
    const int W = width();
    define(base + "_s", bv_sort(W + 1),
           "(bvadd ((_ sign_extend 1) " + a + ") ((_ sign_extend 1) " + b + "))");
    return narrow(base + "_s", W + 1);
  }

  std::string fxp_potential(const std::string& base, std::span<const double> row,
                            const std::vector<std::string>& in, double bias) {
    const std::string sort = bv_sort(width());
    std::string acc;
    auto accumulate = [&](const std::string& name, const std::string& term) {
      // 0 + t never overflows, so the first term is the accumulator itself
      if (acc.empty()) {
        acc = term;
        return;
      }
      define(name, sort, fxp_add(name, acc, term));
      acc = name;
    };
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::int64_t w = fxp::quantize(row[c], *cfg_);
      if (w == 0) continue; // mult(0, x) = 0 and add(a, 0) = a in both modes
      const std::string m = base + "_m" + std::to_string(c);
      define(m, sort, fxp_mult(m, w, in[c]));
      accumulate(base + "_a" + std::to_string(c), m);
    }
    const std::int64_t b = fxp::quantize(bias, *cfg_);
    if (b != 0) accumulate(base + "_ab", bv_const(b, width()));
    return acc.empty() ? bv_const(0, width()) : acc;
  }

  std::string fxp_activation(Activation act, const std::string& u, const LookupTable* lut) {
    const int W = width();
    switch (act) {
    case Activation::linear: return u;
    case Activation::relu:
      return "(ite (bvslt " + u + " " + bv_const(0, W) + ") " + bv_const(0, W) + " " + u + ")";
    case Activation::sigmoid:
    case Activation::tanh: {
      const auto seg = fxp_segments(*lut, *cfg_);
      return select_tree(
          seg, 0, seg.outputs.size() - 1,
          [&](std::int64_t t) { return "(bvsle " + u + " " + bv_const(t, W) + ")"; },
          [&](std::int64_t o) { return bv_const(o, W); });
    }
    }
    return u;
  }

  // float32 ---------------------------------------------------------------

  std::string float_potential(const std::string& base, std::span<const double> row,
                              const std::vector<std::string>& in, double bias) {
    const std::string sort = "(_ FloatingPoint 8 24)";
    std::string acc = fp_zero;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string a = base + "_a" + std::to_string(c);
      define(a, sort, "(fp.add RNE " + acc + " (fp.mul RNE " + fp_const(static_cast<float>(row[c])) +
                          " " + in[c] + "))");
      acc = a;
    }
    return "(fp.add RNE " + acc + " " + fp_const(static_cast<float>(bias)) + ")";
  }

  std::string float_activation(Activation act, const std::string& u, const LookupTable* lut) {
    switch (act) {
    case Activation::linear: return u;
    case Activation::relu:
      return "(ite (fp.lt " + u + " " + fp_zero + ") " + fp_zero + " " + u + ")";
    case Activation::sigmoid:
    case Activation::tanh: {
      // NaN fails every comparison and ends in the last segment, like the table
      const auto seg = float_segments(*lut);
      return select_tree(
          seg, 0, seg.outputs.size() - 1,
          [&](float t) { return "(fp.leq " + u + " " + fp_const(t) + ")"; },
          [&](float o) { return fp_const(o); });
    }
    }
    return u;
  }

  void declare_output_bits() {
    const std::size_t last = model_.layers().size() - 1;
    for (std::size_t j = 0; j < model_.output_dim(); ++j) {
      const std::string y = neuron_symbol(last, j, SymbolKind::post);
      s_.declarations.push_back("(declare-const " + y + "_bits (_ BitVec 32))");
      // to_fp is onto, and injective except on NaN payloads
      s_.definitions.push_back("(assert (= ((_ to_fp 8 24) " + y + "_bits) " + y + "))");
    }
  }

  // Constraints -----------------------------------------------------------

  /// Bit-vector symbol holding the variable's raw integer (fixed point) or
  /// binary32 pattern (float32).
  std::string var_bits(const VarRef& v) const {
    if (v.tier == Tier::input) return input_symbol(v.index);
    const std::string y = neuron_symbol(model_.layers().size() - 1, v.index, SymbolKind::post);
    return cfg_ ? y : y + "_bits";
  }

  /// Exact value of a float32 pattern as a 280-bit integer multiple of 2^-149.
  std::string float_integer(const std::string& bits) {
    const std::string name = bits + "_int";
    if (float_ints_.insert(name).second) {
      const std::string e = "((_ extract 30 23) " + bits + ")";
      const std::string f = "((_ extract 22 0) " + bits + ")";
      const std::string sig = "(ite (= " + e + " #x00) ((_ zero_extend 1) " + f + ") (concat #b1 " + f + "))";
      const std::string shift = "(ite (= " + e + " #x00) #x00 (bvsub " + e + " #x01))";
      const std::string mag = "(bvshl ((_ zero_extend 256) " + sig + ") ((_ zero_extend 272) " + shift + "))";
      define(name, bv_sort(280),
             "(ite (= ((_ extract 31 31) " + bits + ") #b1) (bvneg " + mag + ") " + mag + ")");
    }
    return name;
  }

  /// sum(coeff * var) cmp bound over exact values: every term is scaled by a
  /// common power of two so the comparison is between integers.
  std::string constraint(const LinearConstraint& c) {
    const int scale = cfg_ ? cfg_->frac_bits : 149;
    const int var_width = cfg_ ? cfg_->width() : 280;
    std::vector<Dyadic> coeffs;
    const Dyadic bound = dyadic(c.bound);
    int low = bound.mantissa == 0 ? std::numeric_limits<int>::max() : bound.exponent;
    for (const Term& t : c.terms) {
      coeffs.push_back(dyadic(t.coeff));
      low = std::min(low, coeffs.back().exponent - scale);
    }
    std::vector<cpp_int> k;
    std::size_t need = 0;
    for (std::size_t i = 0; i < c.terms.size(); ++i) {
      k.push_back(coeffs[i].mantissa << (coeffs[i].exponent - scale - low));
      need = std::max(need, bit_length(k.back()) + var_width + 1);
    }
    cpp_int b = 0;
    if (bound.mantissa != 0) {
      b = bound.mantissa << (bound.exponent - low);
      need = std::max(need, bit_length(b) + 1);
    }
    std::size_t width = need + 2;
    for (std::size_t n = c.terms.size() + 1; n > 1; n = (n + 1) / 2) ++width;
    if (width > max_constraint_width) {
      throw EncodeError("constraint coefficients span too many binades to encode exactly");
    }
    const int B = static_cast<int>(width);

    std::string sum;
    std::vector<std::string> finite;
    for (std::size_t i = 0; i < c.terms.size(); ++i) {
      const std::string bits = var_bits(c.terms[i].var);
      std::string v = bits;
      if (!cfg_) {
        finite.push_back("(not (= ((_ extract 30 23) " + bits + ") #xff))");
        v = float_integer(bits);
      }
      const std::string term = "(bvmul ((_ sign_extend " + std::to_string(B - var_width) + ") " + v +
                               ") " + bv_const(k[i], B) + ")";
      sum = sum.empty() ? term : "(bvadd " + sum + " " + term + ")";
    }
    static constexpr const char* ops[] = {"bvslt", "bvsle", "bvsgt", "bvsge"};
    std::string cmp = "(" + std::string(ops[static_cast<int>(c.cmp)]) + " " + sum + " " + bv_const(b, B) + ")";
    if (finite.empty()) return cmp;
    std::string all = "(and";
    for (const auto& f : finite) all += " " + f;
    return all + " " + cmp + ")";
  }

  void encode_invariants() {
    for (const InvariantConstraint& ic : emit_invariant_constraints(*inv_)) {
      if (ic.layer >= model_.layers().size() || ic.neuron >= model_.layers()[ic.layer].rows()) {
        throw EncodeError("invariant map does not match the model");
      }
      const std::string sym = neuron_symbol(
          ic.layer, ic.neuron, ic.value == NeuronValue::pre ? SymbolKind::pre : SymbolKind::post);
      if (cfg_) {
        const std::int64_t lo = std::max(fxp::ceil_raw(ic.bounds.lo, cfg_->frac_bits), cfg_->min_raw());
        const std::int64_t hi = std::min(fxp::floor_raw(ic.bounds.hi, cfg_->frac_bits), cfg_->max_raw());
        if (lo > hi) continue;
        if (lo > cfg_->min_raw()) {
          s_.invariants.push_back("(assert (bvsle " + bv_const(lo, width()) + " " + sym + "))");
        }
        if (hi < cfg_->max_raw()) {
          s_.invariants.push_back("(assert (bvsle " + sym + " " + bv_const(hi, width()) + "))");
        }
      } else {
        const float lo = float_at_or_below(ic.bounds.lo);
        const float hi = float_at_or_above(ic.bounds.hi);
        if (!std::isfinite(lo) || !std::isfinite(hi)) continue;
        s_.invariants.push_back("(assert (and (fp.leq " + fp_const(lo) + " " + sym + ") (fp.leq " + sym +
                                " " + fp_const(hi) + ")))");
      }
    }
  }

  const ModelIR& model_;
  const QuantFormat& format_;
  const LutSet& luts_;
  const Property& p_;
  const InvariantMap* inv_;
  const EncodeOptions& options_;
  const FxpConfig* cfg_;
  SmtScript s_;
  std::set<std::string> float_ints_;
};

} // namespace

SmtScript encode_fxp(const ModelIR& model, const FxpConfig& cfg, const LutSet& luts,
                     const Property& p, const InvariantMap* invariants, const EncodeOptions& options) {
  const QuantFormat format = cfg;
  return Builder(model, format, luts, p, invariants, options).build();
}

SmtScript encode_float(const ModelIR& model, const Property& p, const LutSet& luts,
                       const InvariantMap* invariants, const EncodeOptions& options) {
  const QuantFormat format = Float32Format{};
  return Builder(model, format, luts, p, invariants, options).build();
}

SmtScript encode(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                 const Property& p, const InvariantMap* invariants, const EncodeOptions& options) {
  return Builder(model, format, luts, p, invariants, options).build();
}

std::vector<std::string> pin_inputs(const SmtScript& script, std::span<const QuantValue> x) {
  if (x.size() != script.inputs.size()) {
    throw DimensionError("expected " + std::to_string(script.inputs.size()) + " input values");
  }
  std::vector<std::string> out;
  const auto* cfg = std::get_if<FxpConfig>(&script.problem->format);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::string lit = cfg ? bv_const(x[i].raw, cfg->width())
                                : hex32(static_cast<std::uint32_t>(x[i].raw));
    out.push_back("(= " + script.inputs[i] + " " + lit + ")");
  }
  return out;
}

// C emission ---------------------------------------------------------------

namespace {

std::string c_float(float f) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%af", static_cast<double>(f));
  return buf;
}

std::string c_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string c_constraint(const LinearConstraint& c) {
  std::string s = "(";
  for (std::size_t i = 0; i < c.terms.size(); ++i) {
    const Term& t = c.terms[i];
    if (i) s += " + ";
    s += c_double(t.coeff) + " * " + (t.var.tier == Tier::input ? "x" : "y") + "[" +
         std::to_string(t.var.index) + "]";
  }
  return s + " " + std::string(to_string(c.cmp)) + " " + c_double(c.bound) + ")";
}

} // namespace

std::string emit_c(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                   const Property& p, const InvariantMap* invariants) {
  p.validate(model.input_dim(), model.output_dim());
  const auto* cfg = std::get_if<FxpConfig>(&format);
  std::ostringstream out;
  out << "/* " << model.layers().size() << "-layer network, " << to_string(format) << " */\n";
  out << "#include <stdint.h>\n\n";
  out << "float nondet_float(void);\n";
  if (cfg) out << "int64_t nondet_fxp(void);\n";
  out << "void __ESBMC_assume(_Bool cond);\n";
  out << "void __ESBMC_assert(_Bool cond, const char *msg);\n\n";

  const std::string value_t = cfg ? "fxp_t" : "float";
  if (cfg) {
    const int W = cfg->width();
    const int F = cfg->frac_bits;
    out << "typedef int64_t fxp_t;\n";
    out << "typedef " << (W <= 31 ? "int64_t" : "__int128") << " fxp_wide_t;\n";
    out << "#define FXP_MAX ((fxp_t)" << cfg->max_raw() << "LL)\n";
    out << "#define FXP_MIN ((fxp_t)(" << cfg->min_raw() + 1 << "LL - 1))\n\n";
    out << "static fxp_t fxp_overflow(fxp_wide_t v) {\n";
    if (cfg->overflow == Overflow::saturate) {
      out << "  return v > FXP_MAX ? FXP_MAX : v < FXP_MIN ? FXP_MIN : (fxp_t)v;\n";
    } else if (W == 64) {
      out << "  return (fxp_t)(uint64_t)v;\n";
    } else {
      out << "  uint64_t bits = (uint64_t)v & ((UINT64_C(1) << " << W << ") - 1);\n";
      out << "  if (bits >> " << W - 1 << ") bits |= ~((UINT64_C(1) << " << W << ") - 1);\n";
      out << "  return (fxp_t)bits;\n";
    }
    out << "}\n\n";
    out << "/* arithmetic right shift assumed for negative values */\n";
    out << "static fxp_wide_t fxp_rescale(fxp_wide_t p) {\n";
    if (F == 0) {
      out << "  return p;\n";
    } else if (cfg->rounding == Rounding::floor) {
      out << "  return p >> " << F << ";\n";
    } else {
      out << "  fxp_wide_t q = p >> " << F << ";\n";
      out << "  fxp_wide_t rem = p - (q << " << F << ");\n";
      out << "  fxp_wide_t half = (fxp_wide_t)1 << " << F - 1 << ";\n";
      out << "  return (rem > half || (rem == half && (q & 1))) ? q + 1 : q;\n";
    }
    out << "}\n\n";
    out << "static fxp_t fxp_add(fxp_t a, fxp_t b) { return fxp_overflow((fxp_wide_t)a + b); }\n";
    out << "static fxp_t fxp_mult(fxp_t a, fxp_t b) { return fxp_overflow(fxp_rescale((fxp_wide_t)a * b)); }\n";
    out << "static double fxp_to_double(fxp_t a) { return (double)a * " << c_double(cfg->resolution())
        << "; }\n\n";
  }

  // tables for the activations in use
  for (Activation act : {Activation::sigmoid, Activation::tanh}) {
    const bool used = std::any_of(model.layers().begin(), model.layers().end(),
                                  [&](const DenseLayer& l) { return l.activation() == act; });
    if (!used) continue;
    const LookupTable* lut = luts.find(act);
    if (!lut) throw EncodeError("no lookup table supplied for activation '" + std::string(to_string(act)) + "'");
    const std::string name(to_string(act));
    std::vector<std::string> thr;
    std::vector<std::string> outs;
    if (cfg) {
      const auto s = fxp_segments(*lut, *cfg);
      for (auto t : s.thresholds) thr.push_back(std::to_string(t));
      for (auto o : s.outputs) outs.push_back(std::to_string(o));
    } else {
      const auto s = float_segments(*lut);
      for (auto t : s.thresholds) thr.push_back(c_float(t));
      for (auto o : s.outputs) outs.push_back(c_float(o));
    }
    auto array = [&](const std::string& n, const std::vector<std::string>& v) {
      out << "static const " << value_t << " " << n << "[" << std::max<std::size_t>(v.size(), 1) << "] = {";
      for (std::size_t i = 0; i < v.size(); ++i) out << (i % 6 ? " " : "\n  ") << v[i] << ",";
      out << "\n};\n";
    };
    array(name + "_threshold", thr);
    array(name + "_output", outs);
    out << "static " << value_t << " " << name << "_lut(" << value_t << " u) {\n";
    out << "  int lo = 0, hi = " << outs.size() - 1 << ";\n";
    out << "  while (lo < hi) {\n";
    out << "    int mid = lo + (hi - lo) / 2;\n";
    out << "    if (u <= " << name << "_threshold[mid]) hi = mid; else lo = mid + 1;\n";
    out << "  }\n";
    out << "  return " << name << "_output[lo];\n";
    out << "}\n\n";
  }

  std::vector<std::vector<std::string>> inv_lines(model.layers().size());
  if (invariants) {
    std::istringstream report(format_invariant_report(*invariants));
    std::string line;
    while (std::getline(report, line)) {
      if (line.rfind("__ESBMC_assume", 0) != 0) continue;
      const std::size_t l = std::stoul(line.substr(line.find("layer") + 5)) - 1;
      if (l < inv_lines.size()) inv_lines[l].push_back(line);
    }
  }

  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const DenseLayer& layer = model.layers()[l];
    const std::string n = std::to_string(l + 1);
    out << "static const " << value_t << " w" << n << "[" << layer.rows() << "][" << layer.cols() << "] = {";
    for (std::size_t r = 0; r < layer.rows(); ++r) {
      out << "\n  {";
      for (std::size_t c = 0; c < layer.cols(); ++c) {
        const double w = layer.weight(r, c);
        out << (c ? ", " : "") << (cfg ? std::to_string(fxp::quantize(w, *cfg)) : c_float(static_cast<float>(w)));
      }
      out << "},";
    }
    out << "\n};\nstatic const " << value_t << " b" << n << "[" << layer.rows() << "] = {";
    for (std::size_t r = 0; r < layer.rows(); ++r) {
      const double b = layer.bias()[r];
      out << (r ? ", " : "") << (cfg ? std::to_string(fxp::quantize(b, *cfg)) : c_float(static_cast<float>(b)));
    }
    out << "};\n";
  }

  out << "\nint main(void) {\n";
  out << "  double x[" << model.input_dim() << "], y[" << model.output_dim() << "];\n";
  out << "  " << value_t << " in[" << model.input_dim() << "];\n";
  for (std::size_t i = 0; i < model.input_dim(); ++i) {
    if (cfg) {
      out << "  in[" << i << "] = nondet_fxp();\n";
      out << "  __ESBMC_assume(in[" << i << "] >= FXP_MIN && in[" << i << "] <= FXP_MAX);\n";
      out << "  x[" << i << "] = fxp_to_double(in[" << i << "]);\n";
    } else {
      out << "  float x_" << i << " = nondet_float();\n";
      out << "  __ESBMC_assume(x_" << i << " == x_" << i << " && x_" << i << " - x_" << i << " == 0.0f);\n";
      out << "  in[" << i << "] = x_" << i << ";\n";
      out << "  x[" << i << "] = in[" << i << "];\n";
    }
  }
  for (const auto& c : p.assumes) out << "  __ESBMC_assume" << c_constraint(c) << ";\n";

  std::string prev = "in";
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const DenseLayer& layer = model.layers()[l];
    const std::string n = std::to_string(l + 1);
    out << "\n  " << value_t << " u" << n << "[" << layer.rows() << "], v" << n << "[" << layer.rows() << "];\n";
    out << "  " << (cfg ? "double" : "float") << " layer" << n << "[" << layer.rows() << "];\n";
    out << "  for (int j = 0; j < " << layer.rows() << "; ++j) {\n";
    if (cfg) {
      out << "    fxp_t acc = 0;\n";
      out << "    for (int i = 0; i < " << layer.cols() << "; ++i) acc = fxp_add(acc, fxp_mult(w" << n
          << "[j][i], " << prev << "[i]));\n";
      out << "    u" << n << "[j] = fxp_add(acc, b" << n << "[j]);\n";
    } else {
      out << "    float acc = 0.0f;\n";
      out << "    for (int i = 0; i < " << layer.cols() << "; ++i) acc = acc + w" << n << "[j][i] * " << prev
          << "[i];\n";
      out << "    u" << n << "[j] = acc + b" << n << "[j];\n";
    }
    switch (layer.activation()) {
    case Activation::linear: out << "    v" << n << "[j] = u" << n << "[j];\n"; break;
    case Activation::relu:
      out << "    v" << n << "[j] = u" << n << "[j] < 0 ? 0 : u" << n << "[j];\n";
      break;
    case Activation::sigmoid:
    case Activation::tanh:
      out << "    v" << n << "[j] = " << to_string(layer.activation()) << "_lut(u" << n << "[j]);\n";
      break;
    }
    out << "    layer" << n << "[j] = " << (cfg ? "fxp_to_double(v" + n + "[j])" : "v" + n + "[j]") << ";\n";
    out << "  }\n";
    for (const auto& line : inv_lines[l]) out << "  " << line << "\n";
    prev = "v" + n;
  }
  out << "\n  for (int j = 0; j < " << model.output_dim() << "; ++j) y[j] = layer" << model.layers().size()
      << "[j];\n";
  out << "  /* constraints are evaluated in double precision here */\n";
  for (std::size_t i = 0; i < p.asserts.size(); ++i) {
    out << "  __ESBMC_assert" << c_constraint(p.asserts[i]).insert(0, "(") << ", \"assert " << i
        << "\");\n";
  }
  out << "  return 0;\n}\n";
  return out.str();
}

} // namespace qnnv
