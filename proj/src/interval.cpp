#include "qnnv/interval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "qnnv/error.hpp"

namespace qnnv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double down(double v) { return std::nextafter(v, -kInf); }
double up(double v) { return std::nextafter(v, kInf); }

Interval widen(const Interval& i, double slack) {
  if (slack <= 0.0) return i;
  return {down(i.lo - slack), up(i.hi + slack)};
}

bool is_monotone(const LookupTable& t) {
  const auto& s = t.samples();
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].output < s[i - 1].output) return false;
  }
  return true;
}

std::pair<double, double> sample_range(const LookupTable& t, std::size_t first, std::size_t last) {
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t i = first; i <= last; ++i) {
    lo = std::min(lo, t.samples()[i].output);
    hi = std::max(hi, t.samples()[i].output);
  }
  return {lo, hi};
}

const LookupTable& require_lut(const LutSet& luts, Activation act) {
  const LookupTable* t = luts.find(act);
  if (t == nullptr) {
    throw LutError("no lookup table supplied for activation '" + std::string(to_string(act)) + "'");
  }
  return *t;
}

} // namespace

Interval Interval::checked(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw DimensionError("invalid interval");
  }
  return {lo, hi};
}

Box affine_bounds(std::span<const double> weights, std::size_t rows, std::size_t cols,
                  std::span<const double> bias, const Box& in) {
  if (weights.size() != rows * cols || bias.size() != rows) {
    throw DimensionError("affine bounds: weight/bias shape mismatch");
  }
  if (in.size() != cols) {
    throw DimensionError("affine bounds: box has " + std::to_string(in.size()) +
                         " dimensions, layer expects " + std::to_string(cols));
  }
  Box out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double lo = bias[r];
    double hi = bias[r];
    for (std::size_t c = 0; c < cols; ++c) {
      const double w = weights[r * cols + c];
      const double a = w * in[c].lo;
      const double b = w * in[c].hi;
      lo = down(lo + down(std::min(a, b)));
      hi = up(hi + up(std::max(a, b)));
    }
    out[r] = {lo, hi};
  }
  return out;
}

Box affine_bounds(const DenseLayer& layer, const Box& in) {
  return affine_bounds(layer.weights(), layer.rows(), layer.cols(), layer.bias(), in);
}

Interval activation_bounds(Activation act, const Interval& in, const LookupTable* lut) {
  switch (act) {
  case Activation::linear: return in;
  case Activation::relu: return {std::max(in.lo, 0.0), std::max(in.hi, 0.0)};
  case Activation::sigmoid:
  case Activation::tanh:
    break;
  }
  if (lut != nullptr) {
    const double eps = lut->epsilon();
    if (is_monotone(*lut)) {
      return {down(lut_eval(*lut, in.lo) - eps), up(lut_eval(*lut, in.hi) + eps)};
    }
    const auto [lo, hi] = sample_range(*lut, lut->index_of(in.lo), lut->index_of(in.hi));
    return {down(lo - eps), up(hi + eps)};
  }
  // libm results are within an ulp or two; widen by a few ulps
  auto lower = [](double v) { return down(down(down(v))); };
  auto upper = [](double v) { return up(up(up(v))); };
  return {lower(activate_real(act, in.lo)), upper(activate_real(act, in.hi))};
}

double InvariantMap::mean_width() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& layer : layers) {
    for (const auto& nb : layer) {
      if (nb) {
        sum += nb->post.width();
        ++n;
      }
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::size_t InvariantMap::bounded_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += static_cast<std::size_t>(std::count_if(layer.begin(), layer.end(),
                                                [](const auto& nb) { return nb.has_value(); }));
  }
  return n;
}

InvariantMap infer_invariants(const ModelIR& model, const Box& input, const LutSet& luts,
                              double quant_slack) {
  if (input.size() != model.input_dim()) {
    throw DimensionError("input box has " + std::to_string(input.size()) +
                         " dimensions, model expects " + std::to_string(model.input_dim()));
  }
  InvariantMap inv;
  Box current = input;
  for (const DenseLayer& layer : model.layers()) {
    const Box pre = affine_bounds(layer, current);
    std::vector<std::optional<NeuronBounds>> bounds;
    Box post(pre.size());
    for (std::size_t j = 0; j < pre.size(); ++j) {
      const Interval p = widen(pre[j], quant_slack);
      post[j] = widen(activation_bounds(layer.activation(), p, luts.find(layer.activation())),
                      quant_slack);
      bounds.push_back(NeuronBounds{p, post[j]});
    }
    inv.layers.push_back(std::move(bounds));
    current = std::move(post);
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Fixed point: exact interval images on raw integers.

namespace {

struct RawInterval {
  int128 lo;
  int128 hi;
};

RawInterval overflow_interval(RawInterval v, const FxpConfig& cfg) {
  const int128 max = cfg.max_raw();
  const int128 min = cfg.min_raw();
  if (v.lo >= min && v.hi <= max) return v;
  if (cfg.overflow == Overflow::saturate) {
    return {std::clamp(v.lo, min, max), std::clamp(v.hi, min, max)};
  }
  const int128 period = static_cast<int128>(1) << cfg.width();
  if (v.hi - v.lo >= period) return {min, max};
  const int128 a = fxp::overflow(v.lo, cfg);
  const int128 b = fxp::overflow(v.hi, cfg);
  if (a <= b) return {a, b};
  return {min, max};
}

Interval to_real(RawInterval v, int frac) {
  return {fxp::raw_to_double_down(static_cast<std::int64_t>(v.lo), frac),
          fxp::raw_to_double_up(static_cast<std::int64_t>(v.hi), frac)};
}

InvariantMap infer_fixed(const ModelIR& model, const Box& input, const LutSet& luts,
                         const FxpConfig& cfg, double quant_slack) {
  cfg.validate();
  const int frac = cfg.frac_bits;
  std::vector<RawInterval> current;
  for (const Interval& d : input) {
    const int128 lo = std::max<int128>(fxp::ceil_raw(d.lo, frac), cfg.min_raw());
    const int128 hi = std::min<int128>(fxp::floor_raw(d.hi, frac), cfg.max_raw());
    if (lo > hi) throw VacuousProperty("input box contains no fixed-point value");
    current.push_back({lo, hi});
  }

  InvariantMap inv;
  for (const DenseLayer& layer : model.layers()) {
    const LookupTable* lut = nullptr;
    if (layer.activation() == Activation::sigmoid || layer.activation() == Activation::tanh) {
      lut = &require_lut(luts, layer.activation());
    }
    std::vector<RawInterval> next(layer.rows());
    std::vector<std::optional<NeuronBounds>> bounds;
    for (std::size_t r = 0; r < layer.rows(); ++r) {
      RawInterval acc{0, 0};
      const auto w = layer.row(r);
      for (std::size_t c = 0; c < layer.cols(); ++c) {
        const int128 wq = fxp::quantize(w[c], cfg);
        const int128 a = wq * current[c].lo;
        const int128 b = wq * current[c].hi;
        RawInterval term{fxp::shift_round(std::min(a, b), frac, cfg.rounding),
                         fxp::shift_round(std::max(a, b), frac, cfg.rounding)};
        term = overflow_interval(term, cfg);
        acc = overflow_interval({acc.lo + term.lo, acc.hi + term.hi}, cfg);
      }
      const int128 bq = fxp::quantize(layer.bias()[r], cfg);
      const RawInterval pre = overflow_interval({acc.lo + bq, acc.hi + bq}, cfg);

      RawInterval post = pre;
      switch (layer.activation()) {
      case Activation::linear: break;
      case Activation::relu:
        post = {std::max<int128>(pre.lo, 0), std::max<int128>(pre.hi, 0)};
        break;
      case Activation::sigmoid:
      case Activation::tanh: {
        const auto lo_idx = index_of_raw(*lut, static_cast<std::int64_t>(pre.lo), frac);
        const auto hi_idx = index_of_raw(*lut, static_cast<std::int64_t>(pre.hi), frac);
        post = {cfg.max_raw(), cfg.min_raw()};
        for (std::size_t i = lo_idx; i <= hi_idx; ++i) {
          const int128 q = fxp::quantize(lut->samples()[i].output, cfg);
          post.lo = std::min(post.lo, q);
          post.hi = std::max(post.hi, q);
        }
        break;
      }
      }
      next[r] = post;
      bounds.push_back(
          NeuronBounds{widen(to_real(pre, frac), quant_slack), widen(to_real(post, frac), quant_slack)});
    }
    inv.layers.push_back(std::move(bounds));
    current = std::move(next);
  }
  return inv;
}

// ---------------------------------------------------------------------------
// float32: every binary32 operation is monotone, so endpoint images are exact.

struct FloatInterval {
  float lo;
  float hi;
};

bool finite(const FloatInterval& v) { return std::isfinite(v.lo) && std::isfinite(v.hi); }

InvariantMap infer_float(const ModelIR& model, const Box& input, const LutSet& luts,
                         double quant_slack) {
  std::vector<std::optional<FloatInterval>> current;
  for (const Interval& d : input) {
    const double lo = std::max(d.lo, -static_cast<double>(std::numeric_limits<float>::max()));
    const double hi = std::min(d.hi, static_cast<double>(std::numeric_limits<float>::max()));
    float flo = static_cast<float>(lo);
    if (static_cast<double>(flo) < lo) flo = std::nextafter(flo, std::numeric_limits<float>::infinity());
    float fhi = static_cast<float>(hi);
    if (static_cast<double>(fhi) > hi) fhi = std::nextafter(fhi, -std::numeric_limits<float>::infinity());
    if (!(flo <= fhi)) throw VacuousProperty("input box contains no float32 value");
    current.push_back(FloatInterval{flo, fhi});
  }

  InvariantMap inv;
  for (const DenseLayer& layer : model.layers()) {
    const LookupTable* lut = nullptr;
    if (layer.activation() == Activation::sigmoid || layer.activation() == Activation::tanh) {
      lut = &require_lut(luts, layer.activation());
    }
    std::vector<std::optional<FloatInterval>> next(layer.rows());
    std::vector<std::optional<NeuronBounds>> bounds(layer.rows());
    for (std::size_t r = 0; r < layer.rows(); ++r) {
      std::optional<FloatInterval> acc = FloatInterval{0.0f, 0.0f};
      const auto w = layer.row(r);
      for (std::size_t c = 0; c < layer.cols() && acc; ++c) {
        if (!current[c]) {
          acc.reset();
          break;
        }
        const float wf = static_cast<float>(w[c]);
        const float a = wf * current[c]->lo;
        const float b = wf * current[c]->hi;
        const FloatInterval term{std::min(a, b), std::max(a, b)};
        acc = FloatInterval{acc->lo + term.lo, acc->hi + term.hi};
        if (!finite(*acc)) acc.reset();
      }
      if (acc) {
        const float bf = static_cast<float>(layer.bias()[r]);
        acc = FloatInterval{acc->lo + bf, acc->hi + bf};
        if (!finite(*acc)) acc.reset();
      }
      if (!acc) continue;

      FloatInterval post = *acc;
      switch (layer.activation()) {
      case Activation::linear: break;
      case Activation::relu:
        post = {acc->lo < 0.0f ? 0.0f : acc->lo, acc->hi < 0.0f ? 0.0f : acc->hi};
        break;
      case Activation::sigmoid:
      case Activation::tanh: {
        const auto [lo, hi] = sample_range(*lut, lut->index_of(acc->lo), lut->index_of(acc->hi));
        post = {static_cast<float>(lo), static_cast<float>(hi)};
        break;
      }
      }
      next[r] = post;
      bounds[r] = NeuronBounds{widen({acc->lo, acc->hi}, quant_slack),
                               widen({post.lo, post.hi}, quant_slack)};
    }
    inv.layers.push_back(std::move(bounds));
    current = std::move(next);
  }
  return inv;
}

} // namespace

InvariantMap infer_invariants(const ModelIR& model, const Box& input, const LutSet& luts,
                              const QuantFormat& format, double quant_slack) {
  if (input.size() != model.input_dim()) {
    throw DimensionError("input box has " + std::to_string(input.size()) +
                         " dimensions, model expects " + std::to_string(model.input_dim()));
  }
  if (const auto* cfg = std::get_if<FxpConfig>(&format)) {
    return infer_fixed(model, input, luts, *cfg, quant_slack);
  }
  return infer_float(model, input, luts, quant_slack);
}

std::vector<InvariantConstraint> emit_invariant_constraints(const InvariantMap& inv) {
  std::vector<InvariantConstraint> out;
  for (std::size_t l = 0; l < inv.layers.size(); ++l) {
    for (std::size_t n = 0; n < inv.layers[l].size(); ++n) {
      const auto& nb = inv.layers[l][n];
      if (!nb) continue;
      out.push_back({l, n, NeuronValue::pre, nb->pre});
      out.push_back({l, n, NeuronValue::post, nb->post});
    }
  }
  return out;
}

std::string format_bound(double v, bool lower, int digits) {
  char buf[64];
  double probe = v;
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, probe);
    const double parsed = std::strtod(buf, nullptr);
    if (lower ? parsed <= v : parsed >= v) return buf;
    const double step = std::max(std::fabs(probe), 1e-300) * std::pow(10.0, -digits);
    probe = lower ? probe - step : probe + step;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_invariant_report(const InvariantMap& inv) {
  std::ostringstream out;
  for (std::size_t l = 0; l < inv.layers.size(); ++l) {
    for (std::size_t n = 0; n < inv.layers[l].size(); ++n) {
      const auto& nb = inv.layers[l][n];
      const std::string name = "layer" + std::to_string(l + 1) + "[" + std::to_string(n) + "]";
      if (!nb) {
        out << "// " << name << ": unbounded\n";
        continue;
      }
      out << "__ESBMC_assume((" << name << " >= " << format_bound(nb->post.lo, true) << ") && ("
          << name << " <= " << format_bound(nb->post.hi, false) << "));\n";
    }
  }
  return out.str();
}

} // namespace qnnv
