#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qnnv/model.hpp"
#include "qnnv/property.hpp"
#include "qnnv/solver.hpp"

namespace qnnv::test {

inline std::optional<SolverSpec> z3() {
  static const std::optional<SolverSpec> spec = [] {
    auto s = find_solver("z3");
    if (s && !probe_solver(*s)) s.reset();
    return s;
  }();
  return spec;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Dense network with the given widths (widths[0] = inputs) and uniformly
/// drawn parameters.
inline ModelIR random_model(std::mt19937_64& rng, const std::vector<std::size_t>& widths,
                            const std::vector<Activation>& acts, double scale = 1.0) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::vector<double> w(widths[l + 1] * widths[l]);
    std::vector<double> b(widths[l + 1]);
    for (double& v : w) v = uniform(rng, -scale, scale);
    for (double& v : b) v = uniform(rng, -scale / 2, scale / 2);
    layers.emplace_back(widths[l + 1], widths[l], std::move(w), std::move(b), acts[l]);
  }
  return ModelIR(std::move(layers));
}

inline Activation random_activation(std::mt19937_64& rng) {
  static const Activation all[] = {Activation::relu, Activation::linear, Activation::sigmoid,
                                   Activation::tanh};
  return all[pick(rng, 0, 3)];
}

/// Up to three layers of up to four neurons over one or two inputs.
inline ModelIR random_toy_model(std::mt19937_64& rng) {
  const std::size_t depth = pick(rng, 1, 3);
  std::vector<std::size_t> widths{pick(rng, 1, 2)};
  std::vector<Activation> acts;
  for (std::size_t l = 0; l < depth; ++l) {
    widths.push_back(pick(rng, 1, 4));
    acts.push_back(random_activation(rng));
  }
  return random_model(rng, widths, acts, 1.5);
}

inline std::filesystem::path data_dir() { return QNNV_TEST_DATA_DIR; }

} // namespace qnnv::test
