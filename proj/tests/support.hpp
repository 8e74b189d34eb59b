#pragma once
// Hand-rolled generators for property tests. They draw from std::mt19937_64
// so test inputs never share a code path with the library's own generator.
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "turnover/dataset.hpp"
#include "turnover/matrix.hpp"
#include "turnover/network.hpp"

namespace turnover::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double real(double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }
  std::uint64_t u64() { return engine_(); }

  Vector vector(std::size_t n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (auto& x : v) x = real(lo, hi);
    return v;
  }
  Matrix matrix(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (auto& x : m.values()) x = real();
    return m;
  }
  /// [d_in, hidden..., classes] with 1-3 hidden layers of width 2-8.
  std::vector<std::size_t> widths(std::size_t d_in = 0, std::size_t classes = 0) {
    std::vector<std::size_t> w{d_in ? d_in : index(1, 5)};
    const std::size_t hidden = index(1, 3);
    for (std::size_t i = 0; i < hidden; ++i) w.push_back(index(2, 8));
    w.push_back(classes ? classes : index(2, 4));
    return w;
  }
  /// Params with every entry random, including the logit layer.
  ModelParams dense_params(const ModelConfig& config) {
    ModelParams p = init_params(config, u64());
    for (auto& w : p.weights) {
      for (auto& x : w.values()) x = real();
    }
    for (auto& b : p.biases) {
      for (auto& x : b) x = real(-0.5, 0.5);
    }
    return p;
  }
  Dataset blobs(std::size_t n, std::size_t dim, double sep, std::size_t classes = 2) {
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Instance> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i].label = i % classes;
      out[i].features.resize(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        const double centre = out[i].label == 0 ? -sep : sep;
        out[i].features[d] = centre + noise(engine_);
      }
    }
    return Dataset(std::move(out), classes);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace turnover::testing
