#pragma once

// Unbounded-integer reference semantics for fixed point, written from the
// definitions (rationals, floor, modular reduction) rather than from the
// int128 kernels they check.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <optional>

#include "qnnv/error.hpp"
#include "qnnv/fixedpoint.hpp"

namespace qnnv::test {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

inline cpp_int ref_floor(const cpp_rational& x) {
  const cpp_int n = numerator(x);
  const cpp_int d = denominator(x); // always positive
  cpp_int q = n / d;
  if (n % d != 0 && n < 0) q -= 1;
  return q;
}

inline cpp_int ref_round(const cpp_rational& x, Rounding mode) {
  const cpp_int fl = ref_floor(x);
  if (mode == Rounding::floor) return fl;
  const cpp_rational frac = x - cpp_rational(fl);
  const cpp_rational half(1, 2);
  if (frac > half) return fl + 1;
  if (frac < half) return fl;
  return (fl % 2 == 0) ? fl : fl + 1;
}

inline std::int64_t ref_overflow(const cpp_int& v, const FxpConfig& cfg) {
  const cpp_int lo = -(cpp_int(1) << (cfg.width() - 1));
  const cpp_int hi = (cpp_int(1) << (cfg.width() - 1)) - 1;
  if (cfg.overflow == Overflow::saturate) {
    if (v > hi) return static_cast<std::int64_t>(hi);
    if (v < lo) return static_cast<std::int64_t>(lo);
    return static_cast<std::int64_t>(v);
  }
  const cpp_int period = cpp_int(1) << cfg.width();
  cpp_int r = (v - lo) % period;
  if (r < 0) r += period;
  return static_cast<std::int64_t>(r + lo);
}

enum class Op { add, sub, mult, div };

/// Reference result of `a op b` on raw values; nullopt for division by zero.
inline std::optional<std::int64_t> ref_op(Op op, std::int64_t a, std::int64_t b, const FxpConfig& cfg) {
  const cpp_int A(a);
  const cpp_int B(b);
  const cpp_int scale = cpp_int(1) << cfg.frac_bits;
  switch (op) {
  case Op::add: return ref_overflow(A + B, cfg);
  case Op::sub: return ref_overflow(A - B, cfg);
  case Op::mult: return ref_overflow(ref_round(cpp_rational(A * B, scale), cfg.rounding), cfg);
  case Op::div:
    if (b == 0) return std::nullopt;
    // the two-argument constructor wants a positive denominator
    return ref_overflow(ref_round(b > 0 ? cpp_rational(A * scale, B) : cpp_rational(-A * scale, -B),
                                  cfg.rounding),
                        cfg);
  }
  return std::nullopt;
}

/// Library result of the same operation; nullopt when it reports DivisionByZero.
inline std::optional<std::int64_t> lib_op(Op op, std::int64_t a, std::int64_t b, const FxpConfig& cfg) {
  const FxpValue x(a, cfg);
  const FxpValue y(b, cfg);
  switch (op) {
  case Op::add: return fxp_add(x, y).raw();
  case Op::sub: return fxp_sub(x, y).raw();
  case Op::mult: return fxp_mult(x, y).raw();
  case Op::div:
    try {
      return fxp_div(x, y).raw();
    } catch (const DivisionByZero&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

/// round(x * 2^F) under the conversion mode, then overflow; x finite.
inline std::int64_t ref_quantize(double x, const FxpConfig& cfg) {
  cpp_rational r(0);
  if (x != 0.0) {
    int e = 0;
    const double m = std::frexp(x, &e);
    const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
    const int shift = e - 53 + cfg.frac_bits;
    r = shift >= 0 ? cpp_rational(cpp_int(mant) << shift)
                   : cpp_rational(cpp_int(mant), cpp_int(1) << -shift);
  }
  return ref_overflow(ref_round(r, cfg.conversion), cfg);
}

} // namespace qnnv::test
