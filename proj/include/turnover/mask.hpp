#pragma once

// Instance-specific dropout masks. A mask is never stored: it is regenerated
// from (global seed, instance id, layer) whenever it is needed.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "turnover/matrix.hpp"

namespace turnover {

/// Each mask entry drawn independently from the counter-based generator.
struct DirectScheme {
  bool operator==(const DirectScheme&) const = default;
};

/// Masks built as the scaled AND of `arity` rows picked from a shared codebook
/// of `codebook_size` binary primitives.
struct HashComposedScheme {
  std::size_t codebook_size = 256;  // K
  std::size_t arity = 2;            // k

  bool operator==(const HashComposedScheme&) const = default;
};

using MaskScheme = std::variant<DirectScheme, HashComposedScheme>;

struct MaskPlan {
  std::uint64_t global_seed = 0;
  double keep_prob = 0.5;
  std::vector<std::size_t> layer_widths;
  MaskScheme scheme = DirectScheme{};

  /// Value of a kept entry, 1/p.
  double scale() const noexcept { return 1.0 / keep_prob; }
  bool hash_composed() const noexcept {
    return std::holds_alternative<HashComposedScheme>(scheme);
  }
  std::size_t max_width() const noexcept;

  /// Throws ConfigError when p is outside (0,1), a width is zero, or the
  /// hash scheme has K < 2 or k < 1.
  void validate() const;

  /// False when a hash-composed plan has fewer than `dataset_size` distinct
  /// code tuples (K^k < N). Direct plans always have capacity.
  bool has_capacity_for(std::size_t dataset_size) const;

  bool operator==(const MaskPlan&) const = default;
};

/// One vector per masked layer, entries in {0, 1/p}.
struct Mask {
  std::vector<Vector> layers;

  std::size_t kept(std::size_t layer) const;
  bool operator==(const Mask&) const = default;
};

/// Binary primitives for hash composition: K rows of the plan's maximum layer
/// width, shared by every layer. Layer l reads the first width_l entries of
/// the rows its own hash selects.
class Codebook {
 public:
  Codebook(std::size_t rows, std::size_t width, double primitive_keep_prob,
           std::vector<std::uint8_t> bits);

  std::size_t size() const noexcept { return rows_; }
  std::size_t width() const noexcept { return width_; }
  double primitive_keep_prob() const noexcept { return primitive_keep_prob_; }
  std::span<const std::uint8_t> primitive(std::size_t row) const;
  std::size_t storage_bytes() const noexcept { return bits_.size() * sizeof(std::uint8_t); }

 private:
  std::size_t rows_;
  std::size_t width_;
  double primitive_keep_prob_;
  std::vector<std::uint8_t> bits_;
};

/// Keep probability of a codebook primitive, p^(1/k), so that the AND of k
/// independent primitives keeps a unit with probability p.
double primitive_keep_prob(double keep_prob, std::size_t arity);

Codebook build_codebook(const MaskPlan& plan);

/// The k codebook rows for (instance, layer). Each layer hashes with its own
/// domain tag so layers get different masks from the same codebook.
std::vector<std::size_t> hash_codes(const MaskPlan& plan, std::uint64_t instance_id,
                                    std::size_t layer = 0);

/// AND of the selected primitives over the first `width` entries, scaled by 1/p.
Vector compose_layer(const Codebook& codebook, std::span<const std::size_t> codes,
                     std::size_t width, double keep_prob);

/// Layer i uses codes[i]; codes.size() must match plan.layer_widths.size().
Mask compose_hash_mask(const Codebook& codebook, const std::vector<std::vector<std::size_t>>& codes,
                       const MaskPlan& plan);

/// Generates m(z) for the instance. For hash-composed plans this builds the
/// codebook on every call; hold a MaskGenerator to reuse it.
Mask generate_mask(const MaskPlan& plan, std::uint64_t instance_id);

/// m~ = 1/p - m, entrywise.
Mask flip_mask(const Mask& mask, const MaskPlan& plan);

/// A plan plus, for hash-composed plans, its codebook. Immutable after
/// construction and safe to share across threads.
class MaskGenerator {
 public:
  explicit MaskGenerator(MaskPlan plan);

  const MaskPlan& plan() const noexcept { return plan_; }
  const Codebook* codebook() const noexcept { return codebook_.get(); }

  Mask mask(std::uint64_t instance_id) const;
  Mask flipped(std::uint64_t instance_id) const { return flip_mask(mask(instance_id), plan_); }

  /// Bytes held between calls: the codebook for hash-composed plans, zero
  /// for direct plans.
  std::size_t resident_bytes() const noexcept;

 private:
  MaskPlan plan_;
  std::shared_ptr<const Codebook> codebook_;
};

/// Number of instance ids in [0, n) whose full per-layer code tuple is shared
/// with a lower id.
std::size_t count_code_collisions(const MaskPlan& plan, std::size_t n);

}  // namespace turnover
