#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qnnv/interval.hpp"
#include "qnnv/quant.hpp"

namespace qnnv {

enum class Tier { input, output };

struct VarRef {
  Tier tier;
  std::size_t index;

  bool operator==(const VarRef&) const = default;
};

struct Term {
  double coeff;
  VarRef var;

  bool operator==(const Term&) const = default;
};

enum class Comparator { lt, le, gt, ge };

std::string_view to_string(Comparator cmp);

/// sum(coeff * var) <cmp> bound, evaluated exactly over the denoted values.
struct LinearConstraint {
  std::vector<Term> terms;
  Comparator cmp;
  double bound;

  bool operator==(const LinearConstraint&) const = default;
};

/// x in H  =>  y in G. The property is violated by an input satisfying every
/// assume and failing at least one assert.
struct Property {
  std::string name;
  std::vector<LinearConstraint> assumes;
  std::vector<LinearConstraint> asserts;

  /// Throws DimensionError if a variable index is out of range.
  void validate(std::size_t input_dim, std::size_t output_dim) const;

  bool operator==(const Property&) const = default;
};

/// Parses the property DSL:
///
///   # comment
///   assume x[0] >= 0;
///   assume 2*x[1] - x[0] < 0.5;
///   assert y[1] > y[0];
///
/// Both sides of a comparison are sums of constants and optionally scaled
/// variables; they are normalized to `terms <cmp> bound`, with variables in
/// order of first appearance. Assumes may only mention inputs x[i], asserts
/// only outputs y[j]. Throws ParseError with line and column.
Property parse_property(std::string_view text, std::string name = "property");
Property parse_property(std::string_view text, std::size_t input_dim, std::size_t output_dim,
                        std::string name = "property");

/// DSL text that parses back to an equal Property.
std::string to_dsl(const Property& p);

/// L-infinity ball of `radius` around x0 implying y[target] > y[j] for all
/// j != target.
Property robustness_property(std::span<const double> x0, double radius, std::size_t target_class,
                             std::size_t num_outputs, std::string name = "robustness");

/// Tightest box implied by the single-variable assumes, intersected with the
/// format's representable range. In fixed point, strict bounds are closed by
/// one quantum and all bounds snap to the grid; in float32 strict bounds move
/// to the adjacent float. Assumes over several variables are ignored here.
/// Throws VacuousProperty when some dimension is empty.
Box extract_box(const Property& p, std::size_t input_dim, const QuantFormat& format);

/// Representable range of the format as a closed interval.
Interval quant_range(const QuantFormat& format);

} // namespace qnnv
