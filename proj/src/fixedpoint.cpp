#include "qnnv/fixedpoint.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <vector>

#include "qnnv/error.hpp"
#include "qnnv/quant.hpp"

namespace qnnv {

void FxpConfig::validate() const {
  if (int_bits < 1) throw ConfigError("fixed-point format needs at least one integer bit");
  if (frac_bits < 0) throw ConfigError("fixed-point fraction bits must be non-negative");
  if (width() > 64) {
    throw ConfigError("fixed-point width " + std::to_string(width()) + " exceeds 64 bits");
  }
}

std::int64_t FxpConfig::max_raw() const {
  return static_cast<std::int64_t>((static_cast<int128>(1) << (width() - 1)) - 1);
}

std::int64_t FxpConfig::min_raw() const {
  return static_cast<std::int64_t>(-(static_cast<int128>(1) << (width() - 1)));
}

double FxpConfig::resolution() const { return std::ldexp(1.0, -frac_bits); }
double FxpConfig::max_value() const { return fxp::raw_to_double_down(max_raw(), frac_bits); }
double FxpConfig::min_value() const { return std::ldexp(-1.0, int_bits); }

std::string to_string(const FxpConfig& cfg) {
  return "fxp:" + std::to_string(cfg.int_bits) + "." + std::to_string(cfg.frac_bits) +
         (cfg.overflow == Overflow::wrap ? ":wrap" : ":sat") +
         (cfg.rounding == Rounding::nearest_even ? ":rne" : ":tn");
}

FxpValue::FxpValue(std::int64_t raw, const FxpConfig& cfg) : raw_(raw), cfg_(cfg) {
  if (raw < cfg.min_raw() || raw > cfg.max_raw()) {
    throw ConfigError("raw value " + std::to_string(raw) + " does not fit " + to_string(cfg));
  }
}

double FxpValue::value() const { return std::ldexp(static_cast<double>(raw_), -cfg_.frac_bits); }

namespace fxp {

std::int64_t overflow(int128 v, const FxpConfig& cfg) {
  const int128 hi = cfg.max_raw();
  const int128 lo = cfg.min_raw();
  if (v >= lo && v <= hi) return static_cast<std::int64_t>(v);
  if (cfg.overflow == Overflow::saturate) {
    return static_cast<std::int64_t>(v > hi ? hi : lo);
  }
  using uint128 = unsigned __int128;
  const int w = cfg.width();
  const uint128 mask = (static_cast<uint128>(1) << w) - 1;
  uint128 bits = static_cast<uint128>(v) & mask;
  if (bits >> (w - 1)) {
    bits |= ~mask;
  }
  return static_cast<std::int64_t>(static_cast<int128>(bits));
}

int128 shift_round(int128 v, int shift, Rounding mode) {
  if (shift == 0) return v;
  const int128 q = v >> shift;
  if (mode == Rounding::floor) return q;
  const int128 rem = v - (q << shift);
  const int128 half = static_cast<int128>(1) << (shift - 1);
  if (rem > half || (rem == half && (q & 1) != 0)) return q + 1;
  return q;
}

int128 div_round(int128 n, int128 d, Rounding mode) {
  int128 q = n / d;
  int128 r = n % d;
  if (r != 0 && ((r < 0) != (d < 0))) {
    --q;
    r += d;
  }
  if (mode == Rounding::floor || r == 0) return q;
  const int128 twice = 2 * (r < 0 ? -r : r);
  const int128 mag = d < 0 ? -d : d;
  if (twice > mag || (twice == mag && (q & 1) != 0)) return q + 1;
  return q;
}

std::int64_t add(std::int64_t a, std::int64_t b, const FxpConfig& cfg) {
  return overflow(static_cast<int128>(a) + b, cfg);
}

std::int64_t mult(std::int64_t a, std::int64_t b, const FxpConfig& cfg) {
  const int128 wide = static_cast<int128>(a) * b;
  return overflow(shift_round(wide, cfg.frac_bits, cfg.rounding), cfg);
}

std::int64_t quantize(double x, const FxpConfig& cfg) {
  if (!std::isfinite(x)) {
    throw Error("cannot convert non-finite value to fixed point");
  }
  const double scaled = std::ldexp(x, cfg.frac_bits);
  if (!std::isfinite(scaled)) {
    // |x| >= 2^(1024 - frac_bits): a multiple of 2^64, so it wraps to zero
    if (cfg.overflow == Overflow::wrap) return 0;
    return x > 0 ? cfg.max_raw() : cfg.min_raw();
  }
  const double rounded =
      cfg.conversion == Rounding::nearest_even ? std::nearbyint(scaled) : std::floor(scaled);
  if (cfg.overflow == Overflow::saturate) {
    if (rounded >= static_cast<double>(cfg.max_raw())) return cfg.max_raw();
    if (rounded <= static_cast<double>(cfg.min_raw())) return cfg.min_raw();
    return static_cast<std::int64_t>(rounded);
  }
  const double period = std::ldexp(1.0, cfg.width());
  const double reduced = std::fmod(rounded, period);
  return overflow(static_cast<int128>(reduced), cfg);
}

std::int64_t floor_raw(double x, int frac_bits) {
  const double s = std::floor(std::ldexp(x, frac_bits));
  if (s >= 0x1p63) return std::numeric_limits<std::int64_t>::max();
  if (s <= -0x1p63) return std::numeric_limits<std::int64_t>::min();
  return static_cast<std::int64_t>(s);
}

std::int64_t ceil_raw(double x, int frac_bits) {
  const double s = std::ceil(std::ldexp(x, frac_bits));
  if (s >= 0x1p63) return std::numeric_limits<std::int64_t>::max();
  if (s <= -0x1p63) return std::numeric_limits<std::int64_t>::min();
  return static_cast<std::int64_t>(s);
}

double raw_to_double_down(std::int64_t raw, int frac_bits) {
  double d = static_cast<double>(raw);
  if (d >= 0x1p63 || static_cast<int128>(d) > raw) {
    d = std::nextafter(d, -std::numeric_limits<double>::infinity());
  }
  return std::ldexp(d, -frac_bits);
}

double raw_to_double_up(std::int64_t raw, int frac_bits) {
  double d = static_cast<double>(raw);
  if (d < 0x1p63 && static_cast<int128>(d) < raw) {
    d = std::nextafter(d, std::numeric_limits<double>::infinity());
  }
  return std::ldexp(d, -frac_bits);
}

} // namespace fxp

namespace {

void require_same(const FxpValue& a, const FxpValue& b) {
  if (a.config() != b.config()) {
    throw ConfigError("fixed-point operands use different formats: " + to_string(a.config()) +
                      " vs " + to_string(b.config()));
  }
}

} // namespace

FxpValue float_to_fxp(double x, const FxpConfig& cfg) {
  cfg.validate();
  return FxpValue(fxp::quantize(x, cfg), cfg);
}

FxpValue fxp_add(const FxpValue& a, const FxpValue& b) {
  require_same(a, b);
  return FxpValue(fxp::add(a.raw(), b.raw(), a.config()), a.config());
}

FxpValue fxp_sub(const FxpValue& a, const FxpValue& b) {
  require_same(a, b);
  return FxpValue(fxp::overflow(static_cast<int128>(a.raw()) - b.raw(), a.config()), a.config());
}

FxpValue fxp_mult(const FxpValue& a, const FxpValue& b) {
  require_same(a, b);
  return FxpValue(fxp::mult(a.raw(), b.raw(), a.config()), a.config());
}

FxpValue fxp_div(const FxpValue& a, const FxpValue& b) {
  require_same(a, b);
  if (b.raw() == 0) throw DivisionByZero();
  const FxpConfig& cfg = a.config();
  const int128 num = static_cast<int128>(a.raw()) << cfg.frac_bits;
  return FxpValue(fxp::overflow(fxp::div_round(num, b.raw(), cfg.rounding), cfg), cfg);
}

FxpValue fxp_potential(std::span<const double> w, std::span<const FxpValue> x, double b,
                       const FxpConfig& cfg) {
  if (w.size() != x.size()) {
    throw DimensionError("potential: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(x.size()) + " inputs");
  }
  cfg.validate();
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (x[i].config() != cfg) {
      throw ConfigError("potential: input " + std::to_string(i) + " uses " +
                        to_string(x[i].config()) + ", expected " + to_string(cfg));
    }
    acc = fxp::add(acc, fxp::mult(fxp::quantize(w[i], cfg), x[i].raw(), cfg), cfg);
  }
  acc = fxp::add(acc, fxp::quantize(b, cfg), cfg);
  return FxpValue(acc, cfg);
}

namespace {

int parse_bits(std::string_view s, std::string_view spec) {
  int v = -1;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("malformed quantization spec '" + std::string(spec) + "'");
  }
  return v;
}

} // namespace

QuantFormat parse_quant_spec(std::string_view spec) {
  if (spec == "float32") return Float32Format{};
  if (!spec.starts_with("fxp:")) {
    throw ConfigError("quantization spec must be 'float32' or 'fxp:<int>.<frac>', got '" +
                      std::string(spec) + "'");
  }
  std::string_view rest = spec.substr(4);
  std::vector<std::string_view> parts;
  while (true) {
    const auto colon = rest.find(':');
    parts.push_back(rest.substr(0, colon));
    if (colon == std::string_view::npos) break;
    rest = rest.substr(colon + 1);
  }
  const auto dot = parts[0].find('.');
  if (dot == std::string_view::npos) {
    throw ConfigError("malformed quantization spec '" + std::string(spec) + "'");
  }
  FxpConfig cfg;
  cfg.int_bits = parse_bits(parts[0].substr(0, dot), spec);
  cfg.frac_bits = parse_bits(parts[0].substr(dot + 1), spec);
  bool seen_overflow = false;
  bool seen_rounding = false;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string_view p = parts[i];
    if ((p == "wrap" || p == "sat") && !seen_overflow) {
      cfg.overflow = p == "wrap" ? Overflow::wrap : Overflow::saturate;
      seen_overflow = true;
    } else if ((p == "rne" || p == "tn") && !seen_rounding) {
      cfg.rounding = p == "rne" ? Rounding::nearest_even : Rounding::floor;
      seen_rounding = true;
    } else {
      throw ConfigError("unknown quantization option '" + std::string(p) + "' in '" +
                        std::string(spec) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::string to_string(const QuantFormat& fmt) {
  if (const auto* cfg = std::get_if<FxpConfig>(&fmt)) return to_string(*cfg);
  return "float32";
}

} // namespace qnnv
