#pragma once

#include <cstdint>
#include <vector>

#include "qnnv/interpreter.hpp"

namespace qnnv {

/// All quantized input values inside a box, per dimension, ascending.
/// float32 grids contain both zeros when the box touches 0 (-0 first).
class QuantGrid {
public:
  QuantGrid(const Box& box, const QuantFormat& format);

  std::size_t dims() const { return lo_.size(); }
  /// Number of grid points; saturates at UINT64_MAX.
  std::uint64_t size() const;
  std::uint64_t extent(std::size_t dim) const { return static_cast<std::uint64_t>(hi_[dim] - lo_[dim] + 1); }
  /// k-th value (0-based, ascending) of a dimension.
  QuantValue value(std::size_t dim, std::uint64_t k) const;
  /// Point with the given lexicographic index (dimension 0 most significant).
  std::vector<QuantValue> point(std::uint64_t index) const;

private:
  QuantFormat format_;
  std::vector<std::int64_t> lo_; // raw (fixed) or order key (float32)
  std::vector<std::int64_t> hi_;
};

struct OracleOptions {
  std::uint64_t limit = std::uint64_t{1} << 20;
  /// 0 = hardware concurrency.
  unsigned threads = 0;
};

/// Decides the property by running the interpreter on every grid point of
/// the assume box (general assumes are filtered per point). Reports the
/// lexicographically first violation. Refuses with GridTooLarge beyond the
/// limit; an empty domain is SAFE with a vacuity note in diagnostics.
Verdict brute_force_verify(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                           const Property& p, const OracleOptions& options = {});

} // namespace qnnv
