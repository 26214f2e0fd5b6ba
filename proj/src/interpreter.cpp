#include "qnnv/interpreter.hpp"

#include <bit>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

#include "qnnv/error.hpp"

namespace qnnv {

std::string_view to_string(Status s) {
  switch (s) {
  case Status::safe: return "SAFE";
  case Status::unsafe: return "UNSAFE";
  case Status::unknown: return "UNKNOWN";
  case Status::timeout: return "TIMEOUT";
  case Status::solver_error: return "SOLVER_ERROR";
  }
  return "?";
}

namespace {

QuantValue float_value(float f) {
  return {static_cast<std::int64_t>(std::bit_cast<std::uint32_t>(f)), static_cast<double>(f)};
}

QuantValue fixed_value(std::int64_t raw, const FxpConfig& cfg) {
  return {raw, std::ldexp(static_cast<double>(raw), -cfg.frac_bits)};
}

} // namespace

QuantValue quantize_input(double v, const QuantFormat& format) {
  if (const auto* cfg = std::get_if<FxpConfig>(&format)) {
    return fixed_value(fxp::quantize(v, *cfg), *cfg);
  }
  return float_value(static_cast<float>(v));
}

QuantValue from_raw(std::int64_t raw, const QuantFormat& format) {
  if (const auto* cfg = std::get_if<FxpConfig>(&format)) {
    if (raw < cfg->min_raw() || raw > cfg->max_raw()) {
      throw ConfigError("raw value " + std::to_string(raw) + " does not fit " + to_string(*cfg));
    }
    return fixed_value(raw, *cfg);
  }
  return float_value(std::bit_cast<float>(static_cast<std::uint32_t>(raw)));
}

Interpreter::Interpreter(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                         InterpretOptions options)
    : format_(format), options_(options), luts_(luts), input_dim_(model.input_dim()) {
  const auto* cfg = std::get_if<FxpConfig>(&format_);
  if (cfg) cfg->validate();
  for (const DenseLayer& dl : model.layers()) {
    Layer l{dl.rows(), dl.cols(), {}, {}, {}, {}, dl.activation(), luts_.find(dl.activation())};
    const bool needs_lut = dl.activation() == Activation::sigmoid || dl.activation() == Activation::tanh;
    if (needs_lut && l.lut == nullptr && !(options_.exact_activations && !cfg)) {
      throw LutError("no lookup table supplied for activation '" +
                     std::string(to_string(dl.activation())) + "'");
    }
    if (cfg) {
      for (double w : dl.weights()) l.wq.push_back(fxp::quantize(w, *cfg));
      for (double b : dl.bias()) l.bq.push_back(fxp::quantize(b, *cfg));
    } else {
      for (double w : dl.weights()) l.wf.push_back(static_cast<float>(w));
      for (double b : dl.bias()) l.bf.push_back(static_cast<float>(b));
    }
    layers_.push_back(std::move(l));
  }
}

QuantValue Interpreter::activate(const Layer& layer, const QuantValue& u) const {
  if (const auto* cfg = std::get_if<FxpConfig>(&format_)) {
    switch (layer.activation) {
    case Activation::linear: return u;
    case Activation::relu: return u.raw < 0 ? fixed_value(0, *cfg) : u;
    case Activation::sigmoid:
    case Activation::tanh: {
      const std::size_t idx = index_of_raw(*layer.lut, u.raw, cfg->frac_bits);
      return fixed_value(fxp::quantize(layer.lut->samples()[idx].output, *cfg), *cfg);
    }
    }
    return u;
  }
  const float v = std::bit_cast<float>(static_cast<std::uint32_t>(u.raw));
  switch (layer.activation) {
  case Activation::linear: return u;
  case Activation::relu: return v < 0.0f ? float_value(0.0f) : u;
  case Activation::sigmoid:
  case Activation::tanh:
    if (options_.exact_activations) {
      return float_value(layer.activation == Activation::sigmoid ? 1.0f / (1.0f + std::exp(-v))
                                                                 : std::tanh(v));
    }
    return float_value(static_cast<float>(lut_eval(*layer.lut, static_cast<double>(v))));
  }
  return u;
}

Trace Interpreter::run(std::span<const QuantValue> x) const {
  if (x.size() != input_dim_) {
    throw DimensionError("input has " + std::to_string(x.size()) + " values, model expects " +
                         std::to_string(input_dim_));
  }
  Trace t;
  t.inputs.assign(x.begin(), x.end());
  const auto* cfg = std::get_if<FxpConfig>(&format_);
  const std::vector<QuantValue>* current = &t.inputs;
  for (const Layer& layer : layers_) {
    std::vector<QuantValue> pre(layer.rows);
    std::vector<QuantValue> post(layer.rows);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      if (cfg) {
        std::int64_t acc = 0;
        for (std::size_t c = 0; c < layer.cols; ++c) {
          acc = fxp::add(acc, fxp::mult(layer.wq[r * layer.cols + c], (*current)[c].raw, *cfg), *cfg);
        }
        acc = fxp::add(acc, layer.bq[r], *cfg);
        pre[r] = fixed_value(acc, *cfg);
      } else {
        float acc = 0.0f;
        for (std::size_t c = 0; c < layer.cols; ++c) {
          const float xv = std::bit_cast<float>(static_cast<std::uint32_t>((*current)[c].raw));
          acc = acc + layer.wf[r * layer.cols + c] * xv;
        }
        acc = acc + layer.bf[r];
        pre[r] = float_value(acc);
      }
      post[r] = activate(layer, pre[r]);
    }
    t.pre.push_back(std::move(pre));
    t.post.push_back(std::move(post));
    current = &t.post.back();
  }
  return t;
}

Trace interpret_quantized(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                          std::span<const QuantValue> x, InterpretOptions options) {
  return Interpreter(model, format, luts, options).run(x);
}

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

cpp_rational dyadic(const cpp_int& mantissa, int exponent) {
  if (exponent >= 0) return cpp_rational(mantissa << exponent);
  return cpp_rational(mantissa, cpp_int(1) << -exponent);
}

cpp_rational exact(double v) {
  if (v == 0.0) return cpp_rational(0);
  int e = 0;
  const double m = std::frexp(v, &e);
  const auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  return dyadic(cpp_int(mant), e - 53);
}

std::optional<cpp_rational> denote(const QuantValue& v, const QuantFormat& format) {
  if (const auto* cfg = std::get_if<FxpConfig>(&format)) {
    return dyadic(cpp_int(v.raw), -cfg->frac_bits);
  }
  if (!std::isfinite(v.value)) return std::nullopt;
  return exact(v.value);
}

} // namespace

bool holds(const LinearConstraint& c, std::span<const QuantValue> x, std::span<const QuantValue> y,
           const QuantFormat& format) {
  cpp_rational sum = 0;
  for (const Term& t : c.terms) {
    const auto& vars = t.var.tier == Tier::input ? x : y;
    if (t.var.index >= vars.size()) {
      throw DimensionError("constraint variable index out of range");
    }
    const auto v = denote(vars[t.var.index], format);
    if (!v) return false;
    sum += exact(t.coeff) * *v;
  }
  const cpp_rational bound = exact(c.bound);
  switch (c.cmp) {
  case Comparator::lt: return sum < bound;
  case Comparator::le: return sum <= bound;
  case Comparator::gt: return sum > bound;
  case Comparator::ge: return sum >= bound;
  }
  return false;
}

PropertyCheck check_property(const Property& p, const Trace& t, const QuantFormat& format) {
  PropertyCheck out;
  const auto& y = t.outputs();
  for (const auto& c : p.assumes) {
    if (!holds(c, t.inputs, y, format)) return out;
  }
  out.assumes_hold = true;
  for (std::size_t i = 0; i < p.asserts.size(); ++i) {
    if (!holds(p.asserts[i], t.inputs, y, format)) {
      out.violated_assert = i;
      break;
    }
  }
  return out;
}

} // namespace qnnv
