#pragma once

// Desk-scale stand-ins for real classification corpora.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "turnover/dataset.hpp"

namespace turnover {

/// Class c is drawn from N(means[c], stddev^2 I); classes alternate by index.
struct GaussianBlobs {
  std::vector<Vector> means;
  double stddev = 1.0;

  bool operator==(const GaussianBlobs&) const = default;
};

/// Two interleaved half circles in 2-D with isotropic Gaussian noise.
struct TwoArcs {
  double noise = 0.1;

  bool operator==(const TwoArcs&) const = default;
};

using SyntheticShape = std::variant<GaussianBlobs, TwoArcs>;

struct LabelNoise {
  double rate = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const LabelNoise&) const = default;
};

struct SyntheticSpec {
  SyntheticShape shape = GaussianBlobs{{{-1.0, -1.0}, {1.0, 1.0}}, 1.0};
  std::size_t n_train = 500;
  std::size_t n_val = 200;
  std::size_t n_test = 1800;
  std::uint64_t seed = 0;
  /// Flips labels of the training split only; val/test stay clean.
  std::optional<LabelNoise> label_noise;
  /// Added to every val/test feature vector (empty = no shift).
  Vector covariate_shift;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

/// n instances of the shape, deterministic in (seed, split).
Dataset sample_shape(const SyntheticShape& shape, std::size_t n, std::uint64_t seed,
                     std::uint64_t split, const Vector& shift = {});

/// Flips floor(rate * n) distinct labels, each to a uniformly chosen other
/// class, and records them as the dataset's flipped ids.
Dataset inject_label_noise(const Dataset& data, const LabelNoise& noise);

Splits generate_synthetic(const SyntheticSpec& spec);

}  // namespace turnover
