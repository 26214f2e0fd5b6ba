#include "qnnv/lut.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "qnnv/error.hpp"

namespace qnnv {

namespace {

double midpoint(double a, double b) { return a + (b - a) * 0.5; }

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

} // namespace

LookupTable::LookupTable(std::string source_tag, std::vector<LutPiece> pieces, double epsilon,
                         std::optional<LutCertificate> certificate)
    : source_tag_(std::move(source_tag)), pieces_(std::move(pieces)), epsilon_(epsilon),
      certificate_(certificate) {
  if (pieces_.empty()) throw LutError("lookup table needs at least one piece");
  if (!(epsilon_ > 0.0)) throw LutError("lookup table epsilon must be positive");
  for (std::size_t p = 0; p < pieces_.size(); ++p) {
    const LutPiece& piece = pieces_[p];
    if (piece.samples.empty()) throw LutError("lookup table piece without samples");
    if (!(piece.lo <= piece.hi)) throw LutError("lookup table piece with lo > hi");
    if (p > 0 && !(pieces_[p - 1].hi < piece.lo)) {
      throw LutError("lookup table pieces must be disjoint and ascending");
    }
    if (piece.samples.front().input != piece.lo || piece.samples.back().input != piece.hi) {
      throw LutError("piece samples must start at lo and end at hi");
    }
    for (const LutSample& s : piece.samples) {
      if (!std::isfinite(s.input) || !std::isfinite(s.output)) {
        throw LutError("lookup table samples must be finite");
      }
      if (!flat_.empty() && !(flat_.back().input < s.input)) {
        throw LutError("lookup table sample inputs must be strictly ascending");
      }
      flat_.push_back(s);
    }
  }
  midpoints_.reserve(flat_.size() - 1);
  for (std::size_t i = 0; i + 1 < flat_.size(); ++i) {
    midpoints_.push_back(midpoint(flat_[i].input, flat_[i + 1].input));
  }
}

std::size_t LookupTable::index_of(double u) const {
  const auto it = std::partition_point(midpoints_.begin(), midpoints_.end(),
                                       [u](double m) { return !(u <= m); });
  return static_cast<std::size_t>(it - midpoints_.begin());
}

std::size_t lut_sample_count(double lo, double hi, double lipschitz, double epsilon) {
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) {
    throw LutError("Lipschitz constant must be positive and finite");
  }
  if (!(epsilon > 0.0)) throw LutError("epsilon must be positive");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw LutError("table domain must be a finite interval with hi > lo");
  }
  const double ratio = lipschitz * (hi - lo) / (2.0 * epsilon);
  // absorb the rounding of the decimal inputs so exact ratios stay exact
  const double n = std::ceil(ratio * (1.0 - 4 * std::numeric_limits<double>::epsilon()));
  if (n > 1e8) throw LutError("lookup table would need more than 1e8 samples");
  return static_cast<std::size_t>(n) + 1;
}

LutCertificate audit_lut(const LookupTable& t, const std::function<double(double)>& f,
                         std::size_t points) {
  LutCertificate cert{0, 0.0};
  auto check = [&](double u) {
    cert.max_error = std::max(cert.max_error, std::fabs(lut_eval(t, u) - f(u)));
    ++cert.points;
  };
  for (const LutPiece& piece : t.pieces()) {
    const std::size_t n = std::max<std::size_t>(points, 2);
    for (std::size_t i = 0; i < n; ++i) {
      check(piece.lo + (piece.hi - piece.lo) * (static_cast<double>(i) / static_cast<double>(n - 1)));
    }
    for (std::size_t i = 0; i + 1 < piece.samples.size(); ++i) {
      const double m = midpoint(piece.samples[i].input, piece.samples[i + 1].input);
      check(m);
      check(std::nextafter(m, std::numeric_limits<double>::infinity()));
    }
  }
  return cert;
}

LookupTable build_lut(const std::function<double(double)>& f, std::string source_tag,
                      const std::vector<PieceSpec>& specs, double epsilon,
                      std::size_t audit_points) {
  if (specs.empty()) throw LutError("lookup table needs at least one piece");
  std::vector<LutPiece> pieces;
  for (const PieceSpec& spec : specs) {
    const std::size_t n = lut_sample_count(spec.lo, spec.hi, spec.lipschitz, epsilon);
    LutPiece piece{spec.lo, spec.hi, spec.lipschitz, {}};
    piece.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u =
          i + 1 == n ? spec.hi
                     : spec.lo + (spec.hi - spec.lo) * (static_cast<double>(i) /
                                                        static_cast<double>(n - 1));
      piece.samples.push_back({u, f(u)});
    }
    pieces.push_back(std::move(piece));
  }
  LookupTable table(std::move(source_tag), std::move(pieces), epsilon);
  const LutCertificate cert = audit_lut(table, f, audit_points);
  if (cert.max_error > epsilon) {
    throw LutError("lookup table audit failed: max error " + format_double(cert.max_error) +
                   " exceeds epsilon " + format_double(epsilon));
  }
  return LookupTable(table.source_tag(), table.pieces(), epsilon, cert);
}

LookupTable build_lut(std::string_view activation, double lo, double hi, double lipschitz,
                      double epsilon) {
  std::function<double(double)> f;
  if (activation == "sigmoid") {
    f = sigmoid;
  } else if (activation == "tanh") {
    f = [](double u) { return std::tanh(u); };
  } else if (activation == "linear" || activation == "relu") {
    throw LutError("activation '" + std::string(activation) +
                   "' is exact and bypasses lookup tables");
  } else {
    throw LutError("no Lipschitz function known for activation '" + std::string(activation) +
                   "'; supply the function and its Lipschitz constant");
  }
  return build_lut(f, std::string(activation), {{lo, hi, lipschitz}}, epsilon);
}

double lut_eval(const LookupTable& t, double u) { return t.samples()[t.index_of(u)].output; }

std::int64_t raw_threshold(double midpoint, int frac_bits) {
  return fxp::floor_raw(midpoint, frac_bits);
}

std::size_t index_of_raw(const LookupTable& t, std::int64_t raw, int frac_bits) {
  const auto& mids = t.midpoints();
  const auto it = std::partition_point(
      mids.begin(), mids.end(), [&](double m) { return raw > raw_threshold(m, frac_bits); });
  return static_cast<std::size_t>(it - mids.begin());
}

FxpValue lut_eval_fxp(const LookupTable& t, const FxpValue& u) {
  const std::size_t idx = index_of_raw(t, u.raw(), u.config().frac_bits);
  return float_to_fxp(t.samples()[idx].output, u.config());
}

std::string write_lut_text(const LookupTable& t) {
  std::ostringstream out;
  out << "qnnv-lut 1\n";
  out << "tag " << t.source_tag() << "\n";
  out << "epsilon " << format_double(t.epsilon()) << "\n";
  out << "pieces " << t.pieces().size() << "\n";
  for (const LutPiece& p : t.pieces()) {
    out << "piece " << format_double(p.lo) << " " << format_double(p.hi) << " "
        << format_double(p.lipschitz) << " " << p.samples.size() << "\n";
    for (const LutSample& s : p.samples) {
      out << format_double(s.input) << " " << format_double(s.output) << "\n";
    }
  }
  return out.str();
}

namespace {

class LutReader {
public:
  explicit LutReader(std::string_view text) : text_(text) {}

  std::vector<std::string_view> next_line() {
    while (!text_.empty()) {
      ++line_;
      const auto nl = text_.find('\n');
      std::string_view l = text_.substr(0, nl);
      text_ = nl == std::string_view::npos ? std::string_view{} : text_.substr(nl + 1);
      std::vector<std::string_view> toks;
      std::size_t pos = 0;
      while (pos < l.size()) {
        const auto b = l.find_first_not_of(" \t\r", pos);
        if (b == std::string_view::npos) break;
        if (l[b] == '#') break;
        const auto e = l.find_first_of(" \t\r", b);
        toks.push_back(l.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
        pos = e == std::string_view::npos ? l.size() : e;
      }
      if (!toks.empty()) return toks;
    }
    throw ParseError("unexpected end of lookup table", line_);
  }

  double number(std::string_view tok) const {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("non-numeric token '" + std::string(tok) + "'", line_);
    }
    return v;
  }

  std::size_t count(std::string_view tok) const {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("expected a count, got '" + std::string(tok) + "'", line_);
    }
    return v;
  }

  void expect(const std::vector<std::string_view>& toks, std::string_view key, std::size_t n) const {
    if (toks.size() != n || toks[0] != key) {
      throw ParseError("expected '" + std::string(key) + "' line with " + std::to_string(n - 1) +
                           " field(s)",
                       line_);
    }
  }

  std::size_t line() const { return line_; }
  bool at_end() const { return text_.find_first_not_of(" \t\r\n") == std::string_view::npos; }

private:
  std::string_view text_;
  std::size_t line_ = 0;
};

} // namespace

LookupTable read_lut_text(std::string_view text) {
  LutReader r(text);
  auto toks = r.next_line();
  if (toks.size() != 2 || toks[0] != "qnnv-lut") throw ParseError("missing qnnv-lut header", r.line());
  if (toks[1] != "1") throw ParseError("unsupported lookup table version", r.line());
  toks = r.next_line();
  r.expect(toks, "tag", 2);
  const std::string tag(toks[1]);
  toks = r.next_line();
  r.expect(toks, "epsilon", 2);
  const double epsilon = r.number(toks[1]);
  toks = r.next_line();
  r.expect(toks, "pieces", 2);
  const std::size_t num_pieces = r.count(toks[1]);
  std::vector<LutPiece> pieces;
  for (std::size_t p = 0; p < num_pieces; ++p) {
    toks = r.next_line();
    r.expect(toks, "piece", 5);
    LutPiece piece{r.number(toks[1]), r.number(toks[2]), r.number(toks[3]), {}};
    const std::size_t n = r.count(toks[4]);
    for (std::size_t i = 0; i < n; ++i) {
      toks = r.next_line();
      if (toks.size() != 2) throw ParseError("expected '<input> <output>' sample line", r.line());
      piece.samples.push_back({r.number(toks[0]), r.number(toks[1])});
    }
    pieces.push_back(std::move(piece));
  }
  if (!r.at_end()) throw ParseError("trailing data after last piece", r.line() + 1);
  try {
    return LookupTable(tag, std::move(pieces), epsilon);
  } catch (const LutError& e) {
    throw ParseError(std::string("invalid lookup table: ") + e.what());
  }
}

const LookupTable* LutSet::find(Activation act) const {
  switch (act) {
  case Activation::sigmoid: return sigmoid.get();
  case Activation::tanh: return tanh.get();
  default: return nullptr;
  }
}

LutSet LutSet::defaults() {
  static const LutSet shipped = [] {
    LutSet s;
    s.sigmoid = std::make_shared<const LookupTable>(build_lut("sigmoid", -8.0, 8.0, 0.25, 0.002));
    s.tanh = std::make_shared<const LookupTable>(build_lut("tanh", -4.0, 4.0, 1.0, 0.002));
    return s;
  }();
  return shipped;
}

} // namespace qnnv
