#include "turnover/network.hpp"

#include <atomic>
#include <cmath>

#include "turnover/error.hpp"
#include "turnover/loss.hpp"
#include "turnover/rng.hpp"

namespace turnover {

namespace {

std::atomic<std::uint64_t> g_forward_rows{0};
std::atomic<std::uint64_t> g_backward_passes{0};

void check_mask(const ModelConfig& config, const Mask* mask) {
  if (mask == nullptr) return;
  const auto widths = config.mask_widths();
  if (mask->layers.size() != widths.size()) {
    throw ShapeError("mask has " + std::to_string(mask->layers.size()) + " layers, model masks " +
                     std::to_string(widths.size()));
  }
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (mask->layers[k].size() != widths[k]) {
      throw ShapeError("mask layer " + std::to_string(k) + " has width " +
                       std::to_string(mask->layers[k].size()) + ", expected " +
                       std::to_string(widths[k]));
    }
  }
}

void check_params(const ModelParams& params, const ModelConfig& config) {
  const std::size_t layers = config.layer_widths.size() - 1;
  if (params.weights.size() != layers || params.biases.size() != layers) {
    throw ShapeError("parameters have " + std::to_string(params.weights.size()) +
                     " layers, config has " + std::to_string(layers));
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = params.weights[l];
    if (w.rows() != config.layer_widths[l + 1] || w.cols() != config.layer_widths[l]) {
      throw ShapeError("layer " + std::to_string(l) + " weight is " + w.shape_string() +
                       ", config expects " + std::to_string(config.layer_widths[l + 1]) + "x" +
                       std::to_string(config.layer_widths[l]));
    }
    const bool has_bias = l + 1 < layers || config.output_bias;
    const std::size_t expected = has_bias ? config.layer_widths[l + 1] : 0;
    if (params.biases[l].size() != expected) {
      throw ShapeError("layer " + std::to_string(l) + " bias has " +
                       std::to_string(params.biases[l].size()) + " entries, expected " +
                       std::to_string(expected));
    }
  }
}

// Shared by every forward path so that batched and single evaluation agree
// bit for bit.
template <typename Sink>
Vector run_forward(const ModelParams& params, const ModelConfig& config, std::span<const double> x,
                   const Mask* mask, Sink&& sink) {
  if (x.size() != config.input_dim()) {
    throw ShapeError("input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(config.input_dim()));
  }
  check_mask(config, mask);
  const std::size_t hidden = config.num_hidden();
  Vector activation(x.begin(), x.end());
  std::size_t mask_index = 0;
  for (std::size_t l = 0; l < hidden; ++l) {
    Vector pre(config.layer_widths[l + 1]);
    affine(params.weights[l], activation, params.biases[l], pre);
    Vector post(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    const Vector* slice = nullptr;
    if (mask != nullptr && config.masked_layers[l]) {
      slice = &mask->layers[mask_index++];
      for (std::size_t i = 0; i < post.size(); ++i) post[i] *= (*slice)[i];
    }
    sink(l, pre, post, slice);
    activation = std::move(post);
  }
  Vector out(config.num_classes());
  affine(params.weights[hidden], activation, params.biases[hidden], out);
  g_forward_rows.fetch_add(1, std::memory_order_relaxed);
  return out;
}

}  // namespace

ModelConfig ModelConfig::mlp(std::vector<std::size_t> widths, double keep_prob) {
  ModelConfig config;
  config.layer_widths = std::move(widths);
  config.masked_layers.assign(config.layer_widths.size() >= 2 ? config.layer_widths.size() - 2 : 0,
                              true);
  config.keep_prob = keep_prob;
  return config;
}

std::vector<std::size_t> ModelConfig::mask_widths() const {
  std::vector<std::size_t> widths;
  for (std::size_t l = 0; l < masked_layers.size(); ++l) {
    if (masked_layers[l]) widths.push_back(layer_widths[l + 1]);
  }
  return widths;
}

MaskPlan ModelConfig::mask_plan(std::uint64_t global_seed, MaskScheme scheme) const {
  MaskPlan plan;
  plan.global_seed = global_seed;
  plan.keep_prob = keep_prob;
  plan.layer_widths = mask_widths();
  plan.scheme = scheme;
  return plan;
}

void ModelConfig::validate() const {
  if (layer_widths.size() < 3) {
    throw ConfigError("model needs an input width, at least one hidden layer and a class count");
  }
  for (std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("layer widths must be positive");
  }
  if (num_classes() < 2) throw ConfigError("a classifier needs at least two classes");
  if (masked_layers.size() != num_hidden()) {
    throw ConfigError("masked_layers has " + std::to_string(masked_layers.size()) +
                      " flags for " + std::to_string(num_hidden()) + " hidden layers");
  }
  if (!(keep_prob > 0.0 && keep_prob < 1.0)) {
    throw ConfigError("keep probability must lie in (0, 1)");
  }
}

void ModelConfig::check_plan(const MaskPlan& plan) const {
  if (plan.layer_widths != mask_widths()) {
    throw ConfigError("mask plan widths do not match the model's masked layers");
  }
  if (plan.keep_prob != keep_prob) {
    throw ConfigError("mask plan keep probability differs from the model's");
  }
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& w : weights) total += w.size();
  for (const auto& b : biases) total += b.size();
  return total;
}

Gradients Gradients::zeros_like(const ModelParams& params) {
  Gradients g;
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : params.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

void Gradients::add(const Gradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    auto dst = weights[l].values();
    auto src = other.weights[l].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
  }
}

void Gradients::scale(double factor) {
  for (auto& w : weights) {
    for (double& v : w.values()) v *= factor;
  }
  for (auto& b : biases) {
    for (double& v : b) v *= factor;
  }
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  params.init_seed = seed;
  const std::size_t layers = config.layer_widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = config.layer_widths[l];
    const std::size_t fan_out = config.layer_widths[l + 1];
    Matrix w(fan_out, fan_in);
    // The logit layer starts at zero so the untrained network predicts the
    // uniform distribution under every mask.
    if (l + 1 < layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      CounterRng rng(seed, streams::kInit | l);
      for (double& v : w.values()) v = rng.uniform(-limit, limit);
    }
    params.weights.push_back(std::move(w));
    const bool has_bias = l + 1 < layers || config.output_bias;
    params.biases.emplace_back(has_bias ? fan_out : 0, 0.0);
  }
  return params;
}

Vector logits(const ModelParams& params, const ModelConfig& config, std::span<const double> x,
              const Mask* mask) {
  check_params(params, config);
  return run_forward(params, config, x, mask, [](auto, auto&, auto&, auto) {});
}

ForwardResult forward(const ModelParams& params, const ModelConfig& config,
                      std::span<const double> x, const Mask* mask) {
  check_params(params, config);
  ForwardResult result;
  auto& cache = result.cache;
  cache.input.assign(x.begin(), x.end());
  result.logits = run_forward(params, config, x, mask,
                              [&](std::size_t, const Vector& pre, const Vector& post, const Vector* slice) {
                                cache.pre.push_back(pre);
                                cache.post.push_back(post);
                                cache.mask_slices.push_back(slice ? *slice : Vector{});
                              });
  cache.logits = result.logits;
  return result;
}

Matrix forward_batch(const ModelParams& params, const ModelConfig& config, const Matrix& inputs,
                     std::span<const Mask* const> masks) {
  check_params(params, config);
  if (masks.size() != inputs.rows()) {
    throw ShapeError("forward_batch: " + std::to_string(masks.size()) + " masks for " +
                     std::to_string(inputs.rows()) + " rows");
  }
  Matrix out(inputs.rows(), config.num_classes());
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    const Vector row = run_forward(params, config, inputs.row(b), masks[b], [](auto, auto&, auto&, auto) {});
    std::copy(row.begin(), row.end(), out.row(b).begin());
  }
  return out;
}

Gradients backward(const ModelParams& params, const ModelConfig& config, const ForwardCache& cache,
                   std::size_t label) {
  check_params(params, config);
  const std::size_t hidden = config.num_hidden();
  if (cache.pre.size() != hidden || cache.post.size() != hidden ||
      cache.input.size() != config.input_dim() || cache.logits.size() != config.num_classes()) {
    throw ShapeError("forward cache does not match the model");
  }
  g_backward_passes.fetch_add(1, std::memory_order_relaxed);

  Gradients grads = Gradients::zeros_like(params);
  Vector delta = softmax_cross_entropy(cache.logits, label).grad_logits;

  auto outer = [](Matrix& dw, const Vector& d, std::span<const double> a) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto row = dw.row(i);
      for (std::size_t j = 0; j < a.size(); ++j) row[j] = d[i] * a[j];
    }
  };

  for (std::size_t l = hidden + 1; l-- > 0;) {
    const std::span<const double> input = l == 0 ? std::span<const double>(cache.input)
                                                 : std::span<const double>(cache.post[l - 1]);
    if (l < hidden) {
      // delta currently holds dL/d(post_l); move it through the mask and ReLU.
      const Vector& slice = cache.mask_slices[l];
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (!slice.empty()) delta[i] *= slice[i];
        if (!(cache.pre[l][i] > 0.0)) delta[i] = 0.0;
      }
    }
    outer(grads.weights[l], delta, input);
    if (!grads.biases[l].empty()) grads.biases[l] = delta;
    if (l > 0) {
      Vector upstream(config.layer_widths[l]);
      transpose_times(params.weights[l], delta, upstream);
      delta = std::move(upstream);
    }
  }
  return grads;
}

void check_shapes(const ModelParams& params, const ModelConfig& config) {
  const auto& widths = config.layer_widths;
  const std::size_t layers = widths.size() - 1;
  if (params.weights.size() != layers || params.biases.size() != layers) {
    throw ShapeError("params have " + std::to_string(params.weights.size()) +
                     " weight layers, config has " + std::to_string(layers));
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const bool logit = l + 1 == layers;
    const std::size_t bias = logit && !config.output_bias ? 0 : widths[l + 1];
    if (params.weights[l].rows() != widths[l + 1] || params.weights[l].cols() != widths[l] ||
        params.biases[l].size() != bias) {
      throw ShapeError("layer " + std::to_string(l) + " is " + params.weights[l].shape_string() +
                       " with " + std::to_string(params.biases[l].size()) + " biases, config expects " +
                       std::to_string(widths[l + 1]) + "x" + std::to_string(widths[l]) + " with " +
                       std::to_string(bias));
    }
  }
}

double loss_on(const ModelParams& params, const ModelConfig& config, std::span<const double> x,
               std::size_t label, const Mask* mask) {
  return cross_entropy(logits(params, config, x, mask), label);
}

PassCounters pass_counters() noexcept {
  return {g_forward_rows.load(), g_backward_passes.load()};
}

void reset_pass_counters() noexcept {
  g_forward_rows.store(0);
  g_backward_passes.store(0);
}

}  // namespace turnover
