#pragma once

// Data cleansing: score each training instance by its mean estimated
// influence on a validation set, drop the most harmful fraction, retrain
// without turn-over dropout, and compare with random removal and with no
// cleansing at all.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "turnover/dataset.hpp"
#include "turnover/influence.hpp"
#include "turnover/network.hpp"
#include "turnover/training.hpp"

namespace turnover {

enum class CleansingVariant { Cleanse, RandomRemoval, NoCleansing };

std::string_view variant_name(CleansingVariant variant);

/// floor(fraction * n); throws ConfigError if fraction is outside (0, 1) or
/// the count is zero.
std::size_t removal_count(std::size_t n, double fraction);

/// Ids with the smallest mean influence (index = train id), ties by ascending
/// id, returned in that order.
std::vector<std::uint64_t> select_harmful(std::span<const double> mean_influences, double fraction);

/// `count` ids drawn uniformly without replacement from [0, n), sorted.
std::vector<std::uint64_t> select_random(std::size_t n, std::size_t count, std::uint64_t seed);

/// Fraction of `removed` that appear in `flipped`.
double removal_precision(std::span<const std::uint64_t> removed,
                         std::span<const std::uint64_t> flipped);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> removed_ids;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
};

struct CleansingReport {
  CleansingVariant variant = CleansingVariant::NoCleansing;
  double removal_fraction = 0.0;
  std::vector<SeedOutcome> runs;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  double mean_loss = 0.0;
  double sd_loss = 0.0;

  void summarize();
};

struct CleansingConfig {
  ModelConfig model;
  /// Must carry a mask plan; it trains the scoring model. Retraining reuses
  /// it without the plan.
  TrainConfig train;
  EstimateOptions estimate;
  unsigned jobs = 1;
};

/// Copy of `base` whose init, shuffle, and mask seeds are all `seed`.
TrainConfig seeded(const TrainConfig& base, std::uint64_t seed);

struct CleansingExperiment {
  CleansingReport cleanse;
  CleansingReport random_removal;
  CleansingReport no_cleansing;
  /// Per seed, the mean influence of every training instance on the validation set.
  std::vector<std::vector<double>> mean_influences;
  /// Per seed, the turn-over model that produced the scores.
  std::vector<TrainedModel> scorers;
  /// Removed-set precision against the training set's flipped ids, pooled over seeds.
  double pooled_precision = 0.0;
};

CleansingExperiment run_cleansing_experiment(const Dataset& train_set, const Dataset& val_set,
                                             const Dataset& test_set, double fraction,
                                             std::span<const std::uint64_t> seeds,
                                             const CleansingConfig& config);

/// How stable the harmful ranking is when only the first n validation
/// instances are used.
struct StabilityRow {
  std::size_t val_size = 0;
  double spearman_vs_full = 0.0;
  /// |removed(n) ∩ removed(full)| / |removed(full)|
  double removed_overlap = 0.0;
};

std::vector<StabilityRow> ranking_stability(const TrainedModel& model, const Dataset& train_set,
                                            const Dataset& val_set,
                                            std::span<const std::size_t> val_sizes, double fraction,
                                            const EstimateOptions& options = {});

/// variant,seed,test_accuracy,test_loss; each variant ends with "mean" and
/// "sd" rows.
void write_cleansing_csv(const CleansingExperiment& experiment, std::ostream& out);

}  // namespace turnover
