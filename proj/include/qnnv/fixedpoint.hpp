#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace qnnv {

using int128 = __int128;

enum class Overflow { wrap, saturate };

/// `floor` is truncation toward negative infinity, i.e. an arithmetic shift.
enum class Rounding { nearest_even, floor };

/// Signed two's-complement format Q(int_bits, frac_bits) with one sign bit.
///
/// `rounding` governs the rescaling step of multiplication and division;
/// `conversion` governs float_to_fxp. The defaults follow the C operational
/// model: wrapping arithmetic, shift-truncating products and round-to-nearest
/// conversion of weights.
struct FxpConfig {
  int int_bits = 4;
  int frac_bits = 4;
  Overflow overflow = Overflow::wrap;
  Rounding rounding = Rounding::floor;
  Rounding conversion = Rounding::nearest_even;

  /// Throws ConfigError unless int_bits >= 1, frac_bits >= 0 and width <= 64.
  void validate() const;

  int width() const { return 1 + int_bits + frac_bits; }
  std::int64_t max_raw() const;
  std::int64_t min_raw() const;
  /// Denoted value of one raw unit, 2^-frac_bits.
  double resolution() const;
  double max_value() const;
  double min_value() const;

  bool operator==(const FxpConfig&) const = default;
};

std::string to_string(const FxpConfig& cfg);

class FxpValue {
public:
  /// Throws ConfigError if `raw` does not fit the configured width.
  FxpValue(std::int64_t raw, const FxpConfig& cfg);

  std::int64_t raw() const { return raw_; }
  const FxpConfig& config() const { return cfg_; }
  /// raw * 2^-frac_bits; exact whenever width <= 53.
  double value() const;

  bool operator==(const FxpValue&) const = default;

private:
  std::int64_t raw_;
  FxpConfig cfg_;
};

FxpValue float_to_fxp(double x, const FxpConfig& cfg);
FxpValue fxp_add(const FxpValue& a, const FxpValue& b);
FxpValue fxp_sub(const FxpValue& a, const FxpValue& b);
FxpValue fxp_mult(const FxpValue& a, const FxpValue& b);
FxpValue fxp_div(const FxpValue& a, const FxpValue& b);

/// Neuron potential in the order of the C model: weights are quantized one by
/// one, products accumulated left to right from zero, the bias added last.
FxpValue fxp_potential(std::span<const double> w, std::span<const FxpValue> x, double b,
                       const FxpConfig& cfg);

namespace fxp {

/// Reduce an exact integer to the configured width by wrapping or saturating.
std::int64_t overflow(int128 v, const FxpConfig& cfg);
/// v / 2^shift under the rounding mode (shift >= 0).
int128 shift_round(int128 v, int shift, Rounding mode);
/// n / d under the rounding mode (d != 0).
int128 div_round(int128 n, int128 d, Rounding mode);

/// Raw-level kernels shared by the interpreter, the interval domain and tests.
std::int64_t add(std::int64_t a, std::int64_t b, const FxpConfig& cfg);
std::int64_t mult(std::int64_t a, std::int64_t b, const FxpConfig& cfg);
std::int64_t quantize(double x, const FxpConfig& cfg);

/// Largest raw r with r * 2^-frac_bits <= x (unclamped; saturates at the
/// int64 range).
std::int64_t floor_raw(double x, int frac_bits);
std::int64_t ceil_raw(double x, int frac_bits);

/// raw * 2^-frac_bits rounded downward / upward to double.
double raw_to_double_down(std::int64_t raw, int frac_bits);
double raw_to_double_up(std::int64_t raw, int frac_bits);

} // namespace fxp

} // namespace qnnv
