#pragma once

// Feedforward ReLU classifier whose hidden-layer outputs can be multiplied by
// a per-instance dropout mask. Without a mask the full network is evaluated.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "turnover/mask.hpp"
#include "turnover/matrix.hpp"

namespace turnover {

enum class Activation { ReLU };

struct ModelConfig {
  /// [d_in, h_1, ..., h_L, n_classes]
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::ReLU;
  /// One flag per hidden layer. Logits are never masked.
  std::vector<bool> masked_layers;
  /// A shared logit bias is trained by every instance and leaks into the
  /// flipped sub-network, so it is off unless asked for.
  bool output_bias = false;
  double keep_prob = 0.5;

  /// Config with every hidden layer masked.
  static ModelConfig mlp(std::vector<std::size_t> widths, double keep_prob = 0.5);

  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t num_classes() const { return layer_widths.back(); }
  std::size_t num_hidden() const { return layer_widths.size() - 2; }

  /// Widths of the masked hidden layers, in order. A MaskPlan for this model
  /// must use exactly these widths.
  std::vector<std::size_t> mask_widths() const;

  /// Mask plan matching this model.
  MaskPlan mask_plan(std::uint64_t global_seed, MaskScheme scheme = DirectScheme{}) const;

  void validate() const;
  /// Throws ConfigError unless the plan's widths and p match this model.
  void check_plan(const MaskPlan& plan) const;

  bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
  /// weights[l] maps layer l's input to its output: (width_{l+1} x width_l).
  std::vector<Matrix> weights;
  /// biases[l] has width_{l+1} entries; the last one is empty without an output bias.
  std::vector<Vector> biases;
  std::uint64_t init_seed = 0;

  std::size_t parameter_count() const;
  bool operator==(const ModelParams&) const = default;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const ModelParams& params);
  void add(const Gradients& other);
  void scale(double factor);
};

struct ForwardCache {
  Vector input;
  std::vector<Vector> pre;          // per hidden layer, before ReLU
  std::vector<Vector> post;         // per hidden layer, after ReLU and mask
  std::vector<Vector> mask_slices;  // per hidden layer; empty when unmasked
  Vector logits;
};

struct ForwardResult {
  Vector logits;
  ForwardCache cache;
};

/// Hidden weights uniform in [-sqrt(6/fan_in), sqrt(6/fan_in)]; logit-layer
/// weights and all biases zero. Deterministic in the seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Logits of the sub-network selected by `mask`, or of the full network when
/// mask is null.
Vector logits(const ModelParams& params, const ModelConfig& config, std::span<const double> x,
              const Mask* mask = nullptr);

ForwardResult forward(const ModelParams& params, const ModelConfig& config,
                      std::span<const double> x, const Mask* mask = nullptr);

/// Row b of `inputs` is evaluated under masks[b] (null = full network).
/// Same arithmetic as `logits`, row by row, so results are bit-identical.
Matrix forward_batch(const ModelParams& params, const ModelConfig& config, const Matrix& inputs,
                     std::span<const Mask* const> masks);

/// Exact gradient of the cross-entropy of the cached forward pass.
/// Parameters annihilated by the cached mask get gradient exactly zero.
Gradients backward(const ModelParams& params, const ModelConfig& config,
                   const ForwardCache& cache, std::size_t label);

/// Throws ShapeError unless params have exactly the layer shapes of config.
void check_shapes(const ModelParams& params, const ModelConfig& config);

double loss_on(const ModelParams& params, const ModelConfig& config, std::span<const double> x,
               std::size_t label, const Mask* mask = nullptr);

/// Process-wide counts of forward rows and backward passes, for checking
/// which code paths touch gradients.
struct PassCounters {
  std::uint64_t forward = 0;
  std::uint64_t backward = 0;
};
PassCounters pass_counters() noexcept;
void reset_pass_counters() noexcept;

/// A trained classifier together with the mask plan it was trained under
/// (absent for plain training).
struct TrainedModel {
  ModelConfig config;
  ModelParams params;
  std::optional<MaskPlan> plan;

  bool operator==(const TrainedModel&) const = default;
};

}  // namespace turnover
