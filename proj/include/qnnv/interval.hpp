#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnnv/lut.hpp"
#include "qnnv/model.hpp"
#include "qnnv/quant.hpp"

namespace qnnv {

/// Closed interval [lo, hi] with finite endpoints.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  /// Throws DimensionError unless lo <= hi and both are finite.
  static Interval checked(double lo, double hi);

  double width() const { return hi - lo; }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }

  bool operator==(const Interval&) const = default;
};

using Box = std::vector<Interval>;

/// Per-output bounds of W x + b over the box, for real arithmetic. Every
/// floating-point operation is rounded outward.
Box affine_bounds(std::span<const double> weights, std::size_t rows, std::size_t cols,
                  std::span<const double> bias, const Box& in);
Box affine_bounds(const DenseLayer& layer, const Box& in);

/// Image of an interval under an activation, for real arithmetic. ReLU and
/// linear are exact. With a table, monotone activations use the table at the
/// endpoints widened by epsilon; without one, the exact function is used.
/// Non-monotone tables are bounded by every sample the interval can reach.
Interval activation_bounds(Activation act, const Interval& in, const LookupTable* lut = nullptr);

struct NeuronBounds {
  Interval pre;  ///< potential u
  Interval post; ///< activation output y
};

/// Per-layer, per-neuron bounds. A neuron without bounds (float32 overflow
/// to infinity) is std::nullopt and contributes no constraint.
struct InvariantMap {
  std::vector<std::vector<std::optional<NeuronBounds>>> layers;

  bool empty() const { return layers.empty(); }
  /// Mean width of the bounded post-activation intervals (0 when none).
  double mean_width() const;
  std::size_t bounded_count() const;
};

/// Bounds for the real-valued network (forward_real semantics, or the true
/// activation functions approximated by the given tables).
InvariantMap infer_invariants(const ModelIR& model, const Box& input, const LutSet& luts,
                              double quant_slack = 0.0);

/// Bounds for the quantized network as executed by interpret_quantized: the
/// exact interval image of each fixed-point or float32 operation in
/// accumulation order, including weight quantization, rounding and overflow.
/// `quant_slack` widens every interval by an extra absolute amount.
InvariantMap infer_invariants(const ModelIR& model, const Box& input, const LutSet& luts,
                              const QuantFormat& format, double quant_slack = 0.0);

enum class NeuronValue { pre, post };

/// Two-sided bound on one neuron value, ready for the encoder's assume set.
struct InvariantConstraint {
  std::size_t layer;  ///< 0-based
  std::size_t neuron; ///< 0-based
  NeuronValue value;
  Interval bounds;
};

/// One constraint per bounded neuron value (potential and output).
std::vector<InvariantConstraint> emit_invariant_constraints(const InvariantMap& inv);

/// Human-readable bounds, one `__ESBMC_assume(...)` line per neuron output
/// with 1-based layer names. Printed bounds are rounded outward.
std::string format_invariant_report(const InvariantMap& inv);

/// Decimal text of `v` with `digits` significant digits, rounded downward
/// (lower = true) or upward so that it still bounds `v`.
std::string format_bound(double v, bool lower, int digits = 12);

} // namespace qnnv
