#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "turnover/matrix.hpp"

namespace turnover {

/// One labeled example. `id` is the instance's dense index in its dataset and
/// keys its dropout mask.
struct Instance {
  std::uint64_t id = 0;
  Vector features;
  std::size_t label = 0;

  bool operator==(const Instance&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  /// Ids are reassigned densely in the given order. Throws DataError on ragged
  /// features or labels >= n_classes.
  Dataset(std::vector<Instance> instances, std::size_t n_classes);

  std::size_t size() const noexcept { return instances_.size(); }
  bool empty() const noexcept { return instances_.empty(); }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }

  const Instance& operator[](std::size_t id) const { return instances_.at(id); }
  std::span<const Instance> instances() const noexcept { return instances_; }
  std::vector<std::uint64_t> ids() const;

  /// Ids whose labels were flipped by a noise generator (ground truth for
  /// cleansing evaluation). Sorted.
  const std::vector<std::uint64_t>& flipped_ids() const noexcept { return flipped_ids_; }
  void set_flipped_ids(std::vector<std::uint64_t> ids);

  /// Copy without the given ids, renumbered densely. Flipped ids are remapped.
  Dataset without(std::span<const std::uint64_t> removed) const;

  /// The instance with the features of `id` and a different label.
  Instance relabeled(std::uint64_t id, std::size_t label) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Instance> instances_;
  std::size_t n_classes_ = 0;
  std::size_t feature_dim_ = 0;
  std::vector<std::uint64_t> flipped_ids_;
};

struct CsvSchema {
  bool header = true;
  /// Class count; 0 means one more than the largest label seen.
  std::size_t n_classes = 0;
};

/// Numeric features followed by an integer label in the last column. Row order
/// defines ids. Errors name the offending line.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// The three splits used by every experiment.
struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;

  bool operator==(const Splits&) const = default;
};

/// Seeded permutation of `data` cut into train/val/test of the given sizes.
Splits split_dataset(const Dataset& data, std::size_t n_val, std::size_t n_test, std::uint64_t seed);

}  // namespace turnover
