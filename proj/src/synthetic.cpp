#include "turnover/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "turnover/error.hpp"
#include "turnover/rng.hpp"

namespace turnover {

namespace {

std::size_t shape_classes(const SyntheticShape& shape) {
  if (const auto* blobs = std::get_if<GaussianBlobs>(&shape)) return blobs->means.size();
  return 2;
}

std::size_t shape_dim(const SyntheticShape& shape) {
  if (const auto* blobs = std::get_if<GaussianBlobs>(&shape)) {
    return blobs->means.empty() ? 0 : blobs->means.front().size();
  }
  return 2;
}

void validate_shape(const SyntheticShape& shape) {
  if (const auto* blobs = std::get_if<GaussianBlobs>(&shape)) {
    if (blobs->means.size() < 2) throw ConfigError("gaussian_blobs needs at least two means");
    for (const auto& m : blobs->means) {
      if (m.empty() || m.size() != blobs->means.front().size()) {
        throw ConfigError("gaussian_blobs means must share one positive dimension");
      }
    }
    if (!(blobs->stddev > 0.0)) throw ConfigError("gaussian_blobs stddev must be positive");
  } else if (!(std::get<TwoArcs>(shape).noise >= 0.0)) {
    throw ConfigError("two_arcs noise must be non-negative");
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  validate_shape(shape);
  if (n_train == 0) throw ConfigError("synthetic spec needs n_train >= 1");
  if (label_noise && !(label_noise->rate >= 0.0 && label_noise->rate < 1.0)) {
    throw ConfigError("label noise rate must lie in [0, 1)");
  }
  if (!covariate_shift.empty() && covariate_shift.size() != shape_dim(shape)) {
    throw ConfigError("covariate shift must have one entry per feature");
  }
}

Dataset sample_shape(const SyntheticShape& shape, std::size_t n, std::uint64_t seed,
                     std::uint64_t split, const Vector& shift) {
  validate_shape(shape);
  const std::size_t classes = shape_classes(shape);
  const std::size_t dim = shape_dim(shape);
  if (!shift.empty() && shift.size() != dim) throw ConfigError("shift dimension mismatch");
  CounterRng rng(seed, streams::kSynthetic | split);
  std::vector<Instance> instances(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& inst = instances[i];
    inst.label = i % classes;
    inst.features.resize(dim);
    if (const auto* blobs = std::get_if<GaussianBlobs>(&shape)) {
      for (std::size_t d = 0; d < dim; ++d) {
        inst.features[d] = blobs->means[inst.label][d] + blobs->stddev * rng.normal();
      }
    } else {
      const double noise = std::get<TwoArcs>(shape).noise;
      const double t = rng.uniform(0.0, std::numbers::pi);
      if (inst.label == 0) {
        inst.features = {std::cos(t), std::sin(t)};
      } else {
        inst.features = {1.0 - std::cos(t), 0.5 - std::sin(t)};
      }
      for (double& v : inst.features) v += noise * rng.normal();
    }
    if (!shift.empty()) {
      for (std::size_t d = 0; d < dim; ++d) inst.features[d] += shift[d];
    }
  }
  return Dataset(std::move(instances), classes);
}

Dataset inject_label_noise(const Dataset& data, const LabelNoise& noise) {
  const auto count = static_cast<std::size_t>(
      std::floor(noise.rate * static_cast<double>(data.size()) + 1e-9));
  std::vector<std::uint64_t> order = data.ids();
  CounterRng rng(noise.seed, streams::kLabelNoise);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<Instance> instances(data.instances().begin(), data.instances().end());
  std::vector<std::uint64_t> flipped(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  for (auto id : flipped) {
    auto& inst = instances[id];
    const std::size_t shift = 1 + static_cast<std::size_t>(rng.below(data.n_classes() - 1));
    inst.label = (inst.label + shift) % data.n_classes();
  }
  Dataset out(std::move(instances), data.n_classes());
  out.set_flipped_ids(std::move(flipped));
  return out;
}

Splits generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Splits splits{sample_shape(spec.shape, spec.n_train, spec.seed, 0),
                sample_shape(spec.shape, spec.n_val, spec.seed, 1, spec.covariate_shift),
                sample_shape(spec.shape, spec.n_test, spec.seed, 2, spec.covariate_shift)};
  if (spec.label_noise && spec.label_noise->rate > 0.0) {
    splits.train = inject_label_noise(splits.train, *spec.label_noise);
  }
  return splits;
}

}  // namespace turnover
