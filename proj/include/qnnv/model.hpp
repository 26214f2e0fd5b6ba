#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qnnv {

enum class Activation { relu, sigmoid, tanh, linear };

std::string_view to_string(Activation act);
/// Throws ParseError on tags outside {relu, sigmoid, tanh, linear}.
Activation parse_activation(std::string_view tag);

/// Fully connected layer: y = act(W x + b). Weights are row-major with one
/// row per output neuron.
class DenseLayer {
public:
  DenseLayer(std::size_t rows, std::size_t cols, std::vector<double> weights,
             std::vector<double> bias, Activation activation);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double weight(std::size_t row, std::size_t col) const { return weights_[row * cols_ + col]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(weights_).subspan(r * cols_, cols_);
  }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }
  Activation activation() const { return activation_; }

  bool operator==(const DenseLayer&) const = default;

private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  Activation activation_;
};

/// Input normalization constants carried by NNET headers. `means` and
/// `ranges` have input_dim + 1 entries; the last one de-normalizes outputs.
struct Normalization {
  std::vector<double> mins;
  std::vector<double> maxs;
  std::vector<double> means;
  std::vector<double> ranges;

  bool operator==(const Normalization&) const = default;
};

/// Immutable feedforward network.
class ModelIR {
public:
  /// Validates layer chaining; throws DimensionError.
  explicit ModelIR(std::vector<DenseLayer> layers,
                   std::optional<Normalization> normalization = std::nullopt);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t input_dim() const { return layers_.front().cols(); }
  std::size_t output_dim() const { return layers_.back().rows(); }
  const std::optional<Normalization>& normalization() const { return normalization_; }

  bool operator==(const ModelIR&) const = default;

private:
  std::vector<DenseLayer> layers_;
  std::optional<Normalization> normalization_;
};

struct NnetOptions {
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::linear;
};

ModelIR parse_nnet(std::string_view text, const NnetOptions& options = {});
ModelIR parse_json_model(std::string_view text);
/// JSON interchange text; doubles are written in shortest round-trip form.
std::string to_json(const ModelIR& model);
/// Loads a model file; `format` is "nnet", "json" or empty (pick by extension).
ModelIR load_model(const std::string& path, std::string_view format = {},
                   const NnetOptions& options = {});

/// Folds NNET normalization into the network: a diagonal input layer maps
/// x to (x - mean) / range and the last layer is rescaled by the output
/// range and mean. Throws ConfigError when the model carries no constants.
ModelIR apply_normalization(const ModelIR& model);

/// Double-precision forward pass with exact activation functions.
std::vector<double> forward_real(const ModelIR& model, std::span<const double> x);

double activate_real(Activation act, double u);

} // namespace qnnv
