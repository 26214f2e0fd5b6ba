#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qnnv/fixedpoint.hpp"
#include "qnnv/model.hpp"

namespace qnnv {

struct LutSample {
  double input;
  double output;

  bool operator==(const LutSample&) const = default;
};

/// One Lipschitz-continuous piece sampled uniformly on [lo, hi].
struct LutPiece {
  double lo;
  double hi;
  double lipschitz;
  std::vector<LutSample> samples;

  bool operator==(const LutPiece&) const = default;
};

/// Result of the dense post-construction sweep.
struct LutCertificate {
  std::size_t points = 0;
  double max_error = 0.0;

  bool operator==(const LutCertificate&) const = default;
};

/// Nearest-sample lookup table for an activation function.
///
/// Lookup picks the sample whose input is nearest to u, with ties going to
/// the lower sample. Concretely, u selects sample i + 1 over sample i iff
/// u > midpoint(i), where midpoint(i) is the double nearest to the average
/// of the two sample inputs. Below the first sample every u maps to the
/// first output (clamp_low), above the last to the last output (clamp_high).
/// NaN maps to clamp_high.
class LookupTable {
public:
  LookupTable(std::string source_tag, std::vector<LutPiece> pieces, double epsilon,
              std::optional<LutCertificate> certificate = std::nullopt);

  const std::string& source_tag() const { return source_tag_; }
  const std::vector<LutPiece>& pieces() const { return pieces_; }
  double epsilon() const { return epsilon_; }
  double clamp_low() const { return flat_.front().output; }
  double clamp_high() const { return flat_.back().output; }
  const std::optional<LutCertificate>& certificate() const { return certificate_; }

  /// All samples of all pieces in ascending input order.
  const std::vector<LutSample>& samples() const { return flat_; }
  /// midpoints()[i] separates samples()[i] and samples()[i + 1].
  const std::vector<double>& midpoints() const { return midpoints_; }
  /// Index of the sample selected for u.
  std::size_t index_of(double u) const;

  bool operator==(const LookupTable& o) const {
    return source_tag_ == o.source_tag_ && pieces_ == o.pieces_ && epsilon_ == o.epsilon_;
  }

private:
  std::string source_tag_;
  std::vector<LutPiece> pieces_;
  double epsilon_;
  std::optional<LutCertificate> certificate_;
  std::vector<LutSample> flat_;
  std::vector<double> midpoints_;
};

struct PieceSpec {
  double lo;
  double hi;
  double lipschitz;
};

/// Number of uniform samples guaranteeing nearest-sample error <= epsilon on
/// a piece: ceil(lipschitz * (hi - lo) / (2 epsilon)) + 1.
std::size_t lut_sample_count(double lo, double hi, double lipschitz, double epsilon);

/// Builds and audits a table for a shipped activation ("sigmoid", "tanh").
/// "linear" and "relu" are rejected (they are exact without a table), as is
/// any other name; use the std::function overload for custom activations.
LookupTable build_lut(std::string_view activation, double lo, double hi, double lipschitz,
                      double epsilon);

/// Builds and audits a table for an arbitrary function over disjoint
/// ascending pieces. Throws LutError if the audit finds an error above
/// epsilon, e.g. because the supplied Lipschitz constant is too small.
LookupTable build_lut(const std::function<double(double)>& f, std::string source_tag,
                      const std::vector<PieceSpec>& pieces, double epsilon,
                      std::size_t audit_points = 1'000'000);

/// Maximum |table(u) - f(u)| over `points` uniform points per piece plus every
/// sample midpoint (from both sides).
LutCertificate audit_lut(const LookupTable& t, const std::function<double(double)>& f,
                         std::size_t points = 1'000'000);

double lut_eval(const LookupTable& t, double u);
/// float_to_fxp(lut_eval(t, u.value())), with the sample selection done on
/// the raw value so the result is exact for every width.
FxpValue lut_eval_fxp(const LookupTable& t, const FxpValue& u);

/// Largest raw r whose denoted value selects a sample at or below index i,
/// i.e. floor(midpoints()[i] * 2^frac_bits).
std::int64_t raw_threshold(double midpoint, int frac_bits);

/// Sample index selected by the fixed-point value raw * 2^-frac_bits.
std::size_t index_of_raw(const LookupTable& t, std::int64_t raw, int frac_bits);

/// Versioned text format: a `qnnv-lut 1` header, the tag, epsilon, then per
/// piece a `piece <lo> <hi> <lipschitz> <count>` line followed by one
/// `<input> <output>` pair per line.
std::string write_lut_text(const LookupTable& t);
LookupTable read_lut_text(std::string_view text);

/// Tables used for non-linear activations when encoding and interpreting.
struct LutSet {
  std::shared_ptr<const LookupTable> sigmoid;
  std::shared_ptr<const LookupTable> tanh;

  /// nullptr for relu/linear or a missing table.
  const LookupTable* find(Activation act) const;

  /// Shipped tables: sigmoid on [-8, 8] with lambda 1/4, tanh on [-4, 4]
  /// with lambda 1, both epsilon = 0.002. Built once and cached.
  static LutSet defaults();
};

} // namespace qnnv
