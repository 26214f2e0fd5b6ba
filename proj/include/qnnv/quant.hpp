#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "qnnv/fixedpoint.hpp"

namespace qnnv {

/// IEEE-754 binary32 with round-to-nearest-even on every operation.
struct Float32Format {
  bool operator==(const Float32Format&) const = default;
};

/// Whole-network arithmetic: one fixed-point format or float32.
using QuantFormat = std::variant<FxpConfig, Float32Format>;

/// Parses `fxp:<int>.<frac>[:wrap|sat][:rne|tn]` or `float32`. The optional
/// rounding suffix selects the product/quotient rescaling mode; weight
/// conversion always rounds to nearest-even. Throws ConfigError.
QuantFormat parse_quant_spec(std::string_view spec);
std::string to_string(const QuantFormat& fmt);

inline bool is_fixed(const QuantFormat& fmt) { return std::holds_alternative<FxpConfig>(fmt); }

} // namespace qnnv
