#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qnnv/lut.hpp"
#include "qnnv/model.hpp"
#include "qnnv/property.hpp"
#include "qnnv/quant.hpp"
#include "qnnv/verdict.hpp"

namespace qnnv {

/// Quantizes a real input into the format (fixed point: float_to_fxp;
/// float32: round to nearest).
QuantValue quantize_input(double v, const QuantFormat& format);
/// Fixed point: `raw` is the two's-complement value. float32: the low 32
/// bits are the IEEE pattern.
QuantValue from_raw(std::int64_t raw, const QuantFormat& format);

struct InterpretOptions {
  /// float32 only: evaluate sigmoid/tanh with libm instead of the tables.
  bool exact_activations = false;
};

/// Bit-exact executable semantics of a quantized network. Weights are
/// quantized once at construction; run() folds each neuron's products left
/// to right starting from zero and adds the bias last, exactly as the SMT
/// encoding does.
class Interpreter {
public:
  Interpreter(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
              InterpretOptions options = {});

  Trace run(std::span<const QuantValue> x) const;
  const QuantFormat& format() const { return format_; }

private:
  struct Layer {
    std::size_t rows;
    std::size_t cols;
    std::vector<std::int64_t> wq; // fixed point
    std::vector<std::int64_t> bq;
    std::vector<float> wf;        // float32
    std::vector<float> bf;
    Activation activation;
    const LookupTable* lut;
  };

  QuantValue activate(const Layer& layer, const QuantValue& u) const;

  QuantFormat format_;
  InterpretOptions options_;
  LutSet luts_;
  std::vector<Layer> layers_;
  std::size_t input_dim_;
};

Trace interpret_quantized(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                          std::span<const QuantValue> x, InterpretOptions options = {});

/// Exact truth value of a constraint over denoted values. A constraint that
/// mentions a non-finite float32 value is false.
bool holds(const LinearConstraint& c, std::span<const QuantValue> x, std::span<const QuantValue> y,
           const QuantFormat& format);

struct PropertyCheck {
  bool assumes_hold = false;
  /// First failing assert, if any.
  std::optional<std::size_t> violated_assert;
};

PropertyCheck check_property(const Property& p, const Trace& t, const QuantFormat& format);

} // namespace qnnv
