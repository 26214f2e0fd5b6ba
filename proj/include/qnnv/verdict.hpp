#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qnnv {

/// A value of the network's arithmetic: the raw fixed-point integer, or the
/// binary32 bit pattern, together with the real number it denotes.
struct QuantValue {
  std::int64_t raw = 0;
  double value = 0.0;

  bool operator==(const QuantValue&) const = default;
};

/// Every neuron value of one execution, layer by layer.
struct Trace {
  std::vector<QuantValue> inputs;
  std::vector<std::vector<QuantValue>> pre;
  std::vector<std::vector<QuantValue>> post;

  const std::vector<QuantValue>& outputs() const { return post.back(); }
};

struct Counterexample {
  std::vector<QuantValue> input_values;
  std::size_t violated_assert = 0;
  Trace trace;
};

enum class Status { safe, unsafe, unknown, timeout, solver_error };

std::string_view to_string(Status s);

struct Verdict {
  Status status = Status::unknown;
  /// Present iff status == unsafe; always replay-validated.
  std::optional<Counterexample> counterexample;
  std::chrono::duration<double> wall_time{0};
  std::string solver;
  /// Solver stderr, decode failures, vacuity warnings.
  std::string diagnostics;
};

} // namespace qnnv
