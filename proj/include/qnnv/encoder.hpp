#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnnv/interval.hpp"
#include "qnnv/lut.hpp"
#include "qnnv/model.hpp"
#include "qnnv/property.hpp"
#include "qnnv/quant.hpp"
#include "qnnv/verdict.hpp"

namespace qnnv {

/// Everything needed to replay a witness through the interpreter.
struct Problem {
  ModelIR model;
  QuantFormat format;
  LutSet luts;
  Property property;
};

enum class Logic { qf_bv, qf_fpbv };

std::string_view to_string(Logic logic);

enum class SymbolKind { input, pre, post };

/// What an SMT symbol stands for. Layers are 0-based here; symbol names use
/// 1-based layer numbers (`l1_n0_u` is the potential of layers[0], neuron 0).
struct SymbolInfo {
  SymbolKind kind;
  std::size_t layer = 0; ///< unused for inputs
  std::size_t index = 0;

  bool operator==(const SymbolInfo&) const = default;
};

struct RenderOptions {
  bool goal = true;
  /// Additional top-level assertions, e.g. pinned inputs.
  std::vector<std::string> extra_asserts;
  /// Symbols for a `(get-value ...)` request after check-sat.
  std::vector<std::string> get_values;
  bool get_model = true;
};

/// An SMT-LIB2 query for one (model, format, property). Sections hold
/// complete commands except `goal_terms`, which are the negated asserts; the
/// rendered goal is their disjunction.
struct SmtScript {
  Logic logic = Logic::qf_bv;
  std::vector<std::string> declarations;
  std::vector<std::string> definitions;
  std::vector<std::string> assumptions;
  std::vector<std::string> invariants;
  std::vector<std::string> goal_terms;
  /// Set in per-assert mode: the only assert whose negation is the goal.
  std::optional<std::size_t> goal_assert;
  /// Input symbols in input order.
  std::vector<std::string> inputs;
  std::map<std::string, SymbolInfo> symbol_table;
  std::shared_ptr<const Problem> problem;

  std::string render(const RenderOptions& options = {}) const;
};

std::string input_symbol(std::size_t i);
std::string neuron_symbol(std::size_t layer, std::size_t neuron, SymbolKind kind);

struct EncodeOptions {
  /// Encode the negation of this assert only.
  std::optional<std::size_t> only_assert;
};

/// Bit-vector encoding replicating the fixed-point interpreter bit for bit.
/// `invariants` (may be null) must have been inferred for the same format
/// and a box containing the property's domain.
SmtScript encode_fxp(const ModelIR& model, const FxpConfig& cfg, const LutSet& luts,
                     const Property& p, const InvariantMap* invariants = nullptr,
                     const EncodeOptions& options = {});

/// binary32 encoding with round-to-nearest-even. Inputs are declared as
/// 32-bit vectors and constrained to finite values.
SmtScript encode_float(const ModelIR& model, const Property& p, const LutSet& luts,
                       const InvariantMap* invariants = nullptr, const EncodeOptions& options = {});

SmtScript encode(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                 const Property& p, const InvariantMap* invariants = nullptr,
                 const EncodeOptions& options = {});

/// `(= in_i <literal>)` for each value, to pin the script's inputs.
std::vector<std::string> pin_inputs(const SmtScript& script, std::span<const QuantValue> x);

/// Annotated C translation for external software model checkers:
/// nondet inputs, assumes, per-neuron statements on the quantized type,
/// injected invariant assumes and the property's assert.
std::string emit_c(const ModelIR& model, const QuantFormat& format, const LutSet& luts,
                   const Property& p, const InvariantMap* invariants = nullptr);

/// Parsed `(get-value ...)` / `(get-model)` output: symbol -> bit pattern of
/// a bit-vector or binary32 value.
using SolverModel = std::map<std::string, std::uint64_t>;

/// Accepts z3/bitwuzla style `define-fun` models, yices style `(= sym val)`
/// entries and get-value pairs; literals `#x..`, `#b..`, `(_ bvN W)`,
/// `(fp ...)` and the special float constants. Throws ParseError.
SolverModel parse_solver_model(std::string_view text);

/// Decodes the inputs of a sat answer, replays them through the interpreter
/// and records the first violated assert. Throws DecodeError when an input
/// is missing or a literal has the wrong shape.
Counterexample decode_model(const SmtScript& script, std::string_view solver_model);

/// Empty when the witness satisfies every assume and violates
/// asserts[violated_assert] on replay; otherwise the reason it does not.
std::optional<std::string> validate_counterexample(const Problem& problem, const Counterexample& cex);

} // namespace qnnv
