#include "turnover/mask.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "turnover/error.hpp"
#include "turnover/rng.hpp"

namespace turnover {

namespace {

std::uint64_t codebook_stream(std::size_t row) { return streams::kCodebook | row; }

void fill_direct(const MaskPlan& plan, std::uint64_t instance_id, std::size_t layer, Vector& out) {
  out.resize(plan.layer_widths[layer]);
  uniform_block(RngKey{plan.global_seed, streams::mask(instance_id, layer)}, 0, out);
  const double scale = plan.scale();
  for (double& v : out) v = v < plan.keep_prob ? scale : 0.0;
}

}  // namespace

std::size_t MaskPlan::max_width() const noexcept {
  return layer_widths.empty() ? 0 : *std::max_element(layer_widths.begin(), layer_widths.end());
}

void MaskPlan::validate() const {
  if (!(keep_prob > 0.0 && keep_prob < 1.0)) {
    throw ConfigError("keep probability must lie in (0, 1), got " + std::to_string(keep_prob));
  }
  if (layer_widths.empty()) throw ConfigError("mask plan has no masked layers");
  if (layer_widths.size() > streams::kMaxMaskedLayers) {
    throw ConfigError("too many masked layers");
  }
  for (std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("masked layer width must be at least 1");
  }
  if (const auto* h = std::get_if<HashComposedScheme>(&scheme)) {
    if (h->codebook_size < 2) throw ConfigError("hash composition needs a codebook of K >= 2");
    if (h->arity < 1) throw ConfigError("hash composition needs k >= 1");
  }
}

bool MaskPlan::has_capacity_for(std::size_t dataset_size) const {
  const auto* h = std::get_if<HashComposedScheme>(&scheme);
  if (h == nullptr) return true;
  double tuples = 1.0;
  for (std::size_t i = 0; i < h->arity && tuples < static_cast<double>(dataset_size); ++i) {
    tuples *= static_cast<double>(h->codebook_size);
  }
  return tuples >= static_cast<double>(dataset_size);
}

std::size_t Mask::kept(std::size_t layer) const {
  return static_cast<std::size_t>(
      std::count_if(layers.at(layer).begin(), layers.at(layer).end(), [](double v) { return v != 0.0; }));
}

Codebook::Codebook(std::size_t rows, std::size_t width, double primitive_keep_prob,
                   std::vector<std::uint8_t> bits)
    : rows_(rows), width_(width), primitive_keep_prob_(primitive_keep_prob), bits_(std::move(bits)) {
  if (bits_.size() != rows_ * width_) {
    throw ShapeError("codebook of " + std::to_string(rows_) + " rows of width " +
                     std::to_string(width_) + " needs " + std::to_string(rows_ * width_) + " bits");
  }
  for (std::uint8_t b : bits_) {
    if (b > 1) throw DataError("codebook entries must be 0 or 1");
  }
}

std::span<const std::uint8_t> Codebook::primitive(std::size_t row) const {
  if (row >= rows_) {
    throw DataError("codebook row " + std::to_string(row) + " out of range for K=" +
                    std::to_string(rows_));
  }
  return {bits_.data() + row * width_, width_};
}

double primitive_keep_prob(double keep_prob, std::size_t arity) {
  if (arity == 1) return keep_prob;
  return std::pow(keep_prob, 1.0 / static_cast<double>(arity));
}

Codebook build_codebook(const MaskPlan& plan) {
  plan.validate();
  const auto* h = std::get_if<HashComposedScheme>(&plan.scheme);
  if (h == nullptr) throw ConfigError("build_codebook requires a hash-composed mask plan");
  const double q = primitive_keep_prob(plan.keep_prob, h->arity);
  const std::size_t width = plan.max_width();
  std::vector<std::uint8_t> bits(h->codebook_size * width);
  Vector draws(width);
  for (std::size_t r = 0; r < h->codebook_size; ++r) {
    uniform_block(RngKey{plan.global_seed, codebook_stream(r)}, 0, draws);
    for (std::size_t j = 0; j < width; ++j) bits[r * width + j] = draws[j] < q ? 1 : 0;
  }
  return Codebook(h->codebook_size, width, q, std::move(bits));
}

std::vector<std::size_t> hash_codes(const MaskPlan& plan, std::uint64_t instance_id,
                                    std::size_t layer) {
  const auto* h = std::get_if<HashComposedScheme>(&plan.scheme);
  if (h == nullptr) throw ConfigError("hash_codes requires a hash-composed mask plan");
  std::vector<std::size_t> codes(h->arity);
  const std::uint64_t base =
      hash_combine(hash_combine(plan.global_seed, streams::kHash | layer), instance_id);
  for (std::size_t t = 0; t < h->arity; ++t) {
    const std::uint64_t x = hash_combine(base, t);
    codes[t] = static_cast<std::size_t>(wide_multiply(x, h->codebook_size).hi);
  }
  return codes;
}

Vector compose_layer(const Codebook& codebook, std::span<const std::size_t> codes,
                     std::size_t width, double keep_prob) {
  if (codes.empty()) throw ConfigError("compose_layer needs at least one code");
  if (width > codebook.width()) {
    throw ShapeError("layer width " + std::to_string(width) + " exceeds codebook width " +
                     std::to_string(codebook.width()));
  }
  std::vector<std::uint8_t> keep(codebook.primitive(codes[0]).begin(),
                                 codebook.primitive(codes[0]).begin() + static_cast<std::ptrdiff_t>(width));
  for (std::size_t t = 1; t < codes.size(); ++t) {
    auto row = codebook.primitive(codes[t]);
    for (std::size_t j = 0; j < width; ++j) keep[j] &= row[j];
  }
  const double scale = 1.0 / keep_prob;
  Vector out(width);
  for (std::size_t j = 0; j < width; ++j) out[j] = keep[j] ? scale : 0.0;
  return out;
}

Mask compose_hash_mask(const Codebook& codebook, const std::vector<std::vector<std::size_t>>& codes,
                       const MaskPlan& plan) {
  if (codes.size() != plan.layer_widths.size()) {
    throw ShapeError("compose_hash_mask: " + std::to_string(codes.size()) + " code tuples for " +
                     std::to_string(plan.layer_widths.size()) + " masked layers");
  }
  Mask mask;
  mask.layers.reserve(codes.size());
  for (std::size_t l = 0; l < codes.size(); ++l) {
    mask.layers.push_back(compose_layer(codebook, codes[l], plan.layer_widths[l], plan.keep_prob));
  }
  return mask;
}

Mask generate_mask(const MaskPlan& plan, std::uint64_t instance_id) {
  return MaskGenerator(plan).mask(instance_id);
}

Mask flip_mask(const Mask& mask, const MaskPlan& plan) {
  if (mask.layers.size() != plan.layer_widths.size()) {
    throw ShapeError("flip_mask: mask has " + std::to_string(mask.layers.size()) +
                     " layers, plan has " + std::to_string(plan.layer_widths.size()));
  }
  const double scale = plan.scale();
  Mask flipped;
  flipped.layers.reserve(mask.layers.size());
  for (std::size_t l = 0; l < mask.layers.size(); ++l) {
    if (mask.layers[l].size() != plan.layer_widths[l]) {
      throw ShapeError("flip_mask: layer " + std::to_string(l) + " has width " +
                       std::to_string(mask.layers[l].size()) + ", plan expects " +
                       std::to_string(plan.layer_widths[l]));
    }
    Vector layer(mask.layers[l].size());
    for (std::size_t j = 0; j < layer.size(); ++j) layer[j] = scale - mask.layers[l][j];
    flipped.layers.push_back(std::move(layer));
  }
  return flipped;
}

MaskGenerator::MaskGenerator(MaskPlan plan) : plan_(std::move(plan)) {
  plan_.validate();
  if (plan_.hash_composed()) codebook_ = std::make_shared<const Codebook>(build_codebook(plan_));
}

Mask MaskGenerator::mask(std::uint64_t instance_id) const {
  Mask mask;
  mask.layers.resize(plan_.layer_widths.size());
  for (std::size_t l = 0; l < plan_.layer_widths.size(); ++l) {
    if (codebook_) {
      const auto codes = hash_codes(plan_, instance_id, l);
      mask.layers[l] = compose_layer(*codebook_, codes, plan_.layer_widths[l], plan_.keep_prob);
    } else {
      fill_direct(plan_, instance_id, l, mask.layers[l]);
    }
  }
  return mask;
}

std::size_t MaskGenerator::resident_bytes() const noexcept {
  return codebook_ ? codebook_->storage_bytes() : 0;
}

std::size_t count_code_collisions(const MaskPlan& plan, std::size_t n) {
  if (!plan.hash_composed()) return 0;
  std::set<std::vector<std::size_t>> seen;
  std::size_t collisions = 0;
  for (std::size_t id = 0; id < n; ++id) {
    std::vector<std::size_t> tuple;
    for (std::size_t l = 0; l < plan.layer_widths.size(); ++l) {
      const auto codes = hash_codes(plan, id, l);
      tuple.insert(tuple.end(), codes.begin(), codes.end());
    }
    if (!seen.insert(std::move(tuple)).second) ++collisions;
  }
  return collisions;
}

}  // namespace turnover
