#include "qnnv/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "qnnv/error.hpp"

namespace qnnv {

namespace {

std::int64_t order_key(float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  if ((bits & 0x80000000u) == 0) return bits;
  return -static_cast<std::int64_t>(bits & 0x7fffffffu) - 1;
}

float from_key(std::int64_t key) {
  const std::uint32_t bits = key >= 0 ? static_cast<std::uint32_t>(key)
                                      : (static_cast<std::uint32_t>(-key - 1) | 0x80000000u);
  return std::bit_cast<float>(bits);
}

} // namespace

QuantGrid::QuantGrid(const Box& box, const QuantFormat& format) : format_(format) {
  const auto* cfg = std::get_if<FxpConfig>(&format);
  for (const Interval& d : box) {
    if (cfg) {
      lo_.push_back(std::max(fxp::ceil_raw(d.lo, cfg->frac_bits), cfg->min_raw()));
      hi_.push_back(std::min(fxp::floor_raw(d.hi, cfg->frac_bits), cfg->max_raw()));
    } else {
      float lo = static_cast<float>(d.lo);
      if (static_cast<double>(lo) < d.lo) lo = std::nextafter(lo, std::numeric_limits<float>::infinity());
      float hi = static_cast<float>(d.hi);
      if (static_cast<double>(hi) > d.hi) hi = std::nextafter(hi, -std::numeric_limits<float>::infinity());
      lo_.push_back(lo == 0.0f ? order_key(-0.0f) : order_key(lo));
      hi_.push_back(hi == 0.0f ? order_key(0.0f) : order_key(hi));
    }
    if (lo_.back() > hi_.back()) throw VacuousProperty("box dimension contains no quantized value");
  }
}

std::uint64_t QuantGrid::size() const {
  std::uint64_t n = 1;
  for (std::size_t d = 0; d < dims(); ++d) {
    const std::uint64_t e = extent(d);
    if (n > std::numeric_limits<std::uint64_t>::max() / e) return std::numeric_limits<std::uint64_t>::max();
    n *= e;
  }
  return n;
}

QuantValue QuantGrid::value(std::size_t dim, std::uint64_t k) const {
  const std::int64_t v = lo_[dim] + static_cast<std::int64_t>(k);
  if (std::holds_alternative<FxpConfig>(format_)) return from_raw(v, format_);
  return from_raw(static_cast<std::int64_t>(std::bit_cast<std::uint32_t>(from_key(v))), format_);
}

std::vector<QuantValue> QuantGrid::point(std::uint64_t index) const {
  std::vector<QuantValue> p(dims());
  for (std::size_t d = dims(); d-- > 0;) {
    const std::uint64_t e = extent(d);
    p[d] = value(d, index % e);
    index /= e;
  }
  return p;
}

Verdict brute_force_verify(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                           const Property& p, const OracleOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  p.validate(model.input_dim(), model.output_dim());
  Verdict verdict;
  verdict.solver = "oracle";

  std::optional<QuantGrid> grid;
  try {
    grid.emplace(extract_box(p, model.input_dim(), format), format);
  } catch (const VacuousProperty& e) {
    verdict.status = Status::safe;
    verdict.diagnostics = std::string("vacuous property: ") + e.what();
    verdict.wall_time = std::chrono::steady_clock::now() - start;
    return verdict;
  }
  const std::uint64_t total = grid->size();
  if (total > options.limit) {
    throw GridTooLarge("input grid has " +
                       (total == std::numeric_limits<std::uint64_t>::max() ? std::string("more than 2^64")
                                                                           : std::to_string(total)) +
                       " points, limit is " + std::to_string(options.limit));
  }

  const Interpreter interp(model, format, luts);
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(total, 1)));

  constexpr std::uint64_t none = std::numeric_limits<std::uint64_t>::max();
  std::atomic<std::uint64_t> first{none};
  std::atomic<std::uint64_t> admitted{0};
  auto scan = [&](std::uint64_t begin, std::uint64_t end) {
    std::uint64_t local_admitted = 0;
    for (std::uint64_t i = begin; i < end && i < first.load(std::memory_order_relaxed); ++i) {
      const std::vector<QuantValue> x = grid->point(i);
      bool admit = true;
      for (const auto& c : p.assumes) {
        if (!holds(c, x, {}, format)) {
          admit = false;
          break;
        }
      }
      if (!admit) continue;
      ++local_admitted;
      const Trace t = interp.run(x);
      const PropertyCheck check = check_property(p, t, format);
      if (check.violated_assert) {
        std::uint64_t cur = first.load();
        while (i < cur && !first.compare_exchange_weak(cur, i)) {
        }
        break;
      }
    }
    admitted += local_admitted;
  };

  if (threads <= 1) {
    scan(0, total);
  } else {
    std::vector<std::jthread> pool;
    const std::uint64_t chunk = (total + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::uint64_t b = t * chunk;
      const std::uint64_t e = std::min(total, b + chunk);
      if (b < e) pool.emplace_back(scan, b, e);
    }
  }

  if (first.load() == none) {
    verdict.status = Status::safe;
    if (admitted.load() == 0) {
      verdict.diagnostics = "vacuous property: no grid point satisfies every assume";
    }
  } else {
    const std::vector<QuantValue> x = grid->point(first.load());
    Counterexample cex;
    cex.input_values = x;
    cex.trace = interp.run(x);
    cex.violated_assert = *check_property(p, cex.trace, format).violated_assert;
    verdict.status = Status::unsafe;
    verdict.counterexample = std::move(cex);
  }
  verdict.wall_time = std::chrono::steady_clock::now() - start;
  return verdict;
}

} // namespace qnnv
