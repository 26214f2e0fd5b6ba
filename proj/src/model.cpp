#include "qnnv/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qnnv/error.hpp"

namespace qnnv {

std::string_view to_string(Activation act) {
  switch (act) {
  case Activation::relu: return "relu";
  case Activation::sigmoid: return "sigmoid";
  case Activation::tanh: return "tanh";
  case Activation::linear: return "linear";
  }
  return "?";
}

Activation parse_activation(std::string_view tag) {
  if (tag == "relu") return Activation::relu;
  if (tag == "sigmoid") return Activation::sigmoid;
  if (tag == "tanh") return Activation::tanh;
  if (tag == "linear") return Activation::linear;
  throw ParseError("unknown activation '" + std::string(tag) + "'");
}

DenseLayer::DenseLayer(std::size_t rows, std::size_t cols, std::vector<double> weights,
                       std::vector<double> bias, Activation activation)
    : rows_(rows), cols_(cols), weights_(std::move(weights)), bias_(std::move(bias)),
      activation_(activation) {
  if (rows_ == 0 || cols_ == 0) {
    throw DimensionError("dense layer must have at least one row and one column");
  }
  if (weights_.size() != rows_ * cols_) {
    throw DimensionError("weight matrix holds " + std::to_string(weights_.size()) +
                         " values, expected " + std::to_string(rows_ * cols_));
  }
  if (bias_.size() != rows_) {
    throw DimensionError("bias length " + std::to_string(bias_.size()) + " != row count " +
                         std::to_string(rows_));
  }
}

ModelIR::ModelIR(std::vector<DenseLayer> layers, std::optional<Normalization> normalization)
    : layers_(std::move(layers)), normalization_(std::move(normalization)) {
  if (layers_.empty()) {
    throw DimensionError("model has no layers");
  }
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].cols() != layers_[i - 1].rows()) {
      throw DimensionError("layer " + std::to_string(i) + " expects " +
                           std::to_string(layers_[i].cols()) + " inputs but layer " +
                           std::to_string(i - 1) + " produces " +
                           std::to_string(layers_[i - 1].rows()));
    }
  }
  if (normalization_) {
    const std::size_t n = input_dim();
    const auto& z = *normalization_;
    if (z.mins.size() != n || z.maxs.size() != n || z.means.size() != n + 1 ||
        z.ranges.size() != n + 1) {
      throw DimensionError("normalization constants do not match input dimension");
    }
  }
}

// ---------------------------------------------------------------------------
// NNET

namespace {

struct NnetLine {
  std::size_t number;
  std::vector<double> values;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view tok, std::size_t line, std::size_t column) {
  tok = trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError("non-numeric token '" + std::string(tok) + "'", line, column);
  }
  return v;
}

std::vector<NnetLine> tokenize_nnet(std::string_view text) {
  std::vector<NnetLine> lines;
  std::size_t number = 0;
  while (!text.empty()) {
    ++number;
    const auto nl = text.find('\n');
    std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    const std::string_view line = trim(raw);
    if (line.empty() || line.starts_with("//")) continue;

    NnetLine parsed{number, {}};
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto comma = line.find(',', pos);
      const std::string_view tok =
          line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      const std::size_t column = static_cast<std::size_t>(raw.find(line) + pos + 1);
      if (!trim(tok).empty()) {
        parsed.values.push_back(parse_double(tok, number, column));
      } else if (comma != std::string_view::npos && !trim(line.substr(comma + 1)).empty()) {
        throw ParseError("empty value between commas", number, column);
      }
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    lines.push_back(std::move(parsed));
  }
  return lines;
}

std::size_t as_count(double v, std::size_t line, const char* what) {
  if (v < 1 || v != std::floor(v) || v > 1e7) {
    throw ParseError(std::string("malformed header: ") + what + " must be a positive integer",
                     line);
  }
  return static_cast<std::size_t>(v);
}

} // namespace

ModelIR parse_nnet(std::string_view text, const NnetOptions& options) {
  const std::vector<NnetLine> lines = tokenize_nnet(text);
  std::size_t cursor = 0;
  auto next = [&](const char* what) -> const NnetLine& {
    if (cursor >= lines.size()) {
      const std::size_t last = lines.empty() ? 0 : lines.back().number;
      throw ParseError(std::string("unexpected end of file while reading ") + what, last);
    }
    return lines[cursor++];
  };
  auto expect_count = [](const NnetLine& l, std::size_t n, const std::string& what) {
    if (l.values.size() != n) {
      throw ParseError("dimension mismatch: " + what + " has " + std::to_string(l.values.size()) +
                           " values, expected " + std::to_string(n),
                       l.number);
    }
  };

  const NnetLine& head = next("header");
  if (head.values.size() < 3) {
    throw ParseError("malformed header: expected layer count, input size, output size",
                     head.number);
  }
  const std::size_t num_layers = as_count(head.values[0], head.number, "layer count");
  const std::size_t input_size = as_count(head.values[1], head.number, "input size");
  const std::size_t output_size = as_count(head.values[2], head.number, "output size");

  const NnetLine& sizes_line = next("layer sizes");
  expect_count(sizes_line, num_layers + 1, "layer size list");
  std::vector<std::size_t> sizes;
  for (double v : sizes_line.values) sizes.push_back(as_count(v, sizes_line.number, "layer size"));
  if (sizes.front() != input_size || sizes.back() != output_size) {
    throw ParseError("malformed header: layer sizes disagree with input/output size",
                     sizes_line.number);
  }

  // The canonical format carries an unused flag line before the minimums; it
  // is detected by line count so flag-less files parse too.
  std::size_t body_lines = 4;
  for (std::size_t k = 0; k < num_layers; ++k) body_lines += 2 * sizes[k + 1];
  const std::size_t remaining = lines.size() - cursor;
  if (remaining == body_lines + 1 ||
      (remaining != body_lines && cursor < lines.size() && lines[cursor].values.size() == 1 &&
       input_size != 1)) {
    next("flag line");
  }

  Normalization norm;
  const NnetLine& mins = next("input minimums");
  expect_count(mins, input_size, "input minimums");
  norm.mins = mins.values;
  const NnetLine& maxs = next("input maximums");
  expect_count(maxs, input_size, "input maximums");
  norm.maxs = maxs.values;
  const NnetLine& means = next("means");
  expect_count(means, input_size + 1, "means");
  norm.means = means.values;
  const NnetLine& ranges = next("ranges");
  expect_count(ranges, input_size + 1, "ranges");
  norm.ranges = ranges.values;

  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k < num_layers; ++k) {
    const std::size_t rows = sizes[k + 1];
    const std::size_t cols = sizes[k];
    std::vector<double> weights;
    weights.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const NnetLine& l = next("weight row");
      expect_count(l, cols, "weight row of layer " + std::to_string(k + 1));
      weights.insert(weights.end(), l.values.begin(), l.values.end());
    }
    std::vector<double> bias;
    for (std::size_t r = 0; r < rows; ++r) {
      const NnetLine& l = next("bias entry");
      expect_count(l, 1, "bias entry of layer " + std::to_string(k + 1));
      bias.push_back(l.values[0]);
    }
    const Activation act =
        k + 1 == num_layers ? options.output_activation : options.hidden_activation;
    layers.emplace_back(rows, cols, std::move(weights), std::move(bias), act);
  }
  if (cursor != lines.size()) {
    throw ParseError("dimension mismatch: trailing data after last layer", lines[cursor].number);
  }
  return ModelIR(std::move(layers), std::move(norm));
}

// ---------------------------------------------------------------------------
// JSON interchange

namespace {

using nlohmann::json;

std::vector<double> number_array(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError("schema violation: " + what + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError("schema violation: " + what + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

} // namespace

ModelIR parse_json_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("schema violation: top level must be an object");
  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != 1) {
    throw ParseError("schema violation: format_version must be the integer 1");
  }
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw ParseError("schema violation: layers must be a non-empty array");
  }

  std::vector<DenseLayer> layers;
  std::size_t index = 0;
  for (const auto& l : doc["layers"]) {
    const std::string where = "layers[" + std::to_string(index++) + "]";
    if (!l.is_object()) throw ParseError("schema violation: " + where + " must be an object");
    if (!l.contains("type") || l["type"] != "dense") {
      throw ParseError("schema violation: " + where + ".type must be \"dense\"");
    }
    for (const char* key : {"weights", "bias", "activation"}) {
      if (!l.contains(key)) throw ParseError("schema violation: " + where + " lacks " + key);
    }
    if (!l["activation"].is_string()) {
      throw ParseError("schema violation: " + where + ".activation must be a string");
    }
    const Activation act = parse_activation(l["activation"].get<std::string>());

    const json& w = l["weights"];
    if (!w.is_array() || w.empty()) {
      throw ParseError("schema violation: " + where + ".weights must be a non-empty array");
    }
    std::vector<double> flat;
    std::size_t cols = 0;
    for (std::size_t r = 0; r < w.size(); ++r) {
      std::vector<double> row = number_array(w[r], where + ".weights[" + std::to_string(r) + "]");
      if (r == 0) {
        cols = row.size();
      } else if (row.size() != cols) {
        throw DimensionError("jagged weight matrix in " + where + ": row " + std::to_string(r) +
                             " has " + std::to_string(row.size()) + " entries, expected " +
                             std::to_string(cols));
      }
      flat.insert(flat.end(), row.begin(), row.end());
    }
    std::vector<double> bias = number_array(l["bias"], where + ".bias");
    layers.emplace_back(w.size(), cols, std::move(flat), std::move(bias), act);
  }

  std::optional<Normalization> norm;
  if (doc.contains("normalization")) {
    const json& n = doc["normalization"];
    if (!n.is_object()) throw ParseError("schema violation: normalization must be an object");
    norm = Normalization{number_array(n.value("mins", json::array()), "normalization.mins"),
                         number_array(n.value("maxs", json::array()), "normalization.maxs"),
                         number_array(n.value("means", json::array()), "normalization.means"),
                         number_array(n.value("ranges", json::array()), "normalization.ranges")};
  }
  return ModelIR(std::move(layers), std::move(norm));
}

std::string to_json(const ModelIR& model) {
  json doc;
  doc["format_version"] = 1;
  doc["layers"] = json::array();
  for (const DenseLayer& layer : model.layers()) {
    json rows = json::array();
    for (std::size_t r = 0; r < layer.rows(); ++r) {
      const auto row = layer.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    doc["layers"].push_back({{"type", "dense"},
                             {"weights", std::move(rows)},
                             {"bias", layer.bias()},
                             {"activation", std::string(to_string(layer.activation()))}});
  }
  if (const auto& n = model.normalization()) {
    doc["normalization"] = {
        {"mins", n->mins}, {"maxs", n->maxs}, {"means", n->means}, {"ranges", n->ranges}};
  }
  return doc.dump(1);
}

ModelIR load_model(const std::string& path, std::string_view format, const NnetOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string fmt(format);
  if (fmt.empty()) {
    fmt = path.ends_with(".json") ? "json" : "nnet";
  }
  if (fmt == "json") return parse_json_model(buf.str());
  if (fmt == "nnet") return parse_nnet(buf.str(), options);
  throw ConfigError("unknown model format '" + fmt + "'");
}

ModelIR apply_normalization(const ModelIR& model) {
  const auto& norm = model.normalization();
  if (!norm) throw ConfigError("model carries no normalization constants");
  const std::size_t n = model.input_dim();
  const std::size_t m = model.output_dim();

  std::vector<double> in_w(n * n, 0.0);
  std::vector<double> in_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    in_w[i * n + i] = 1.0 / norm->ranges[i];
    in_b[i] = -norm->means[i] / norm->ranges[i];
  }
  std::vector<double> out_w(m * m, 0.0);
  std::vector<double> out_b(m, norm->means[n]);
  for (std::size_t j = 0; j < m; ++j) out_w[j * m + j] = norm->ranges[n];

  std::vector<DenseLayer> layers;
  layers.emplace_back(n, n, std::move(in_w), std::move(in_b), Activation::linear);
  layers.insert(layers.end(), model.layers().begin(), model.layers().end());
  layers.emplace_back(m, m, std::move(out_w), std::move(out_b), Activation::linear);
  return ModelIR(std::move(layers));
}

double activate_real(Activation act, double u) {
  switch (act) {
  case Activation::relu: return u < 0.0 ? 0.0 : u;
  case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-u));
  case Activation::tanh: return std::tanh(u);
  case Activation::linear: return u;
  }
  return u;
}

std::vector<double> forward_real(const ModelIR& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw DimensionError("input has " + std::to_string(x.size()) + " values, model expects " +
                         std::to_string(model.input_dim()));
  }
  std::vector<double> current(x.begin(), x.end());
  for (const DenseLayer& layer : model.layers()) {
    std::vector<double> next(layer.rows());
    for (std::size_t r = 0; r < layer.rows(); ++r) {
      double u = 0.0;
      const auto w = layer.row(r);
      for (std::size_t c = 0; c < layer.cols(); ++c) u += w[c] * current[c];
      next[r] = activate_real(layer.activation(), u + layer.bias()[r]);
    }
    current = std::move(next);
  }
  return current;
}

} // namespace qnnv
