#pragma once

// Influence of training instances on a prediction, estimated from a single
// turn-over model with two forward passes per training instance:
//
//   estimate(target, i) = L(f^{m~(z_i)}, target) - L(f^{m(z_i)}, target)
//
// and, for validation, measured exactly by leave-one-out retraining:
//
//   true(target, i) = L(f_{D \ z_i}, target) - L(f_D, target)

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "turnover/dataset.hpp"
#include "turnover/network.hpp"
#include "turnover/training.hpp"

namespace turnover {

enum class Estimator {
  Standard,         // flipped sub-network vs masked sub-network
  FullnetBaseline,  // flipped sub-network vs the full network
};

struct InfluenceRecord {
  std::uint64_t target_id = 0;
  std::uint64_t train_id = 0;
  double estimate = 0.0;
  double flipped_loss = 0.0;
  double masked_loss = 0.0;

  bool operator==(const InfluenceRecord&) const = default;
};

struct OracleRecord {
  std::uint64_t target_id = 0;
  std::uint64_t train_id = 0;
  double true_influence = 0.0;
  double loo_loss = 0.0;
  double full_loss = 0.0;

  bool operator==(const OracleRecord&) const = default;
};

struct EstimateOptions {
  Estimator estimator = Estimator::Standard;
  /// Training instances evaluated per forward batch.
  std::size_t batch_size = 64;
  unsigned jobs = 1;
};

/// Forward-only estimator over a turn-over model. Throws PreconditionError
/// if the model was trained without a mask plan.
class InfluenceEstimator {
 public:
  explicit InfluenceEstimator(const TrainedModel& model, EstimateOptions options = {});

  const TrainedModel& model() const noexcept { return model_; }
  const MaskGenerator& masks() const noexcept { return generator_; }

  /// One record per train id, in the given order.
  std::vector<InfluenceRecord> estimate(const Instance& target,
                                        std::span<const std::uint64_t> train_ids) const;

  /// Per train id, the mean estimate over the targets in `val_set`.
  std::vector<double> mean_on_set(const Dataset& val_set,
                                  std::span<const std::uint64_t> train_ids) const;

 private:
  void estimate_chunk(const Instance& target, std::span<const std::uint64_t> ids,
                      std::span<InfluenceRecord> out) const;

  TrainedModel model_;
  EstimateOptions options_;
  MaskGenerator generator_;
};

std::vector<InfluenceRecord> estimate_influence(const TrainedModel& model, const Instance& target,
                                                std::span<const std::uint64_t> train_ids,
                                                const EstimateOptions& options = {});

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

/// Equal-width bins spanning [min, max] of the values; the last bin is closed.
Histogram make_histogram(std::span<const double> values, std::size_t bins = 20);

struct SelfInfluence {
  std::vector<InfluenceRecord> records;  // target_id == train_id
  Histogram histogram;
};

SelfInfluence self_influence(const TrainedModel& model, const Dataset& train_set,
                             const EstimateOptions& options = {}, std::size_t bins = 20);

std::vector<double> mean_influence_on_set(const TrainedModel& model, const Dataset& val_set,
                                          std::span<const std::uint64_t> train_ids,
                                          const EstimateOptions& options = {});

enum class RankOrder { MostPositive, MostNegative };

struct Ranking {
  std::vector<InfluenceRecord> top;
  /// k exceeded the number of records; everything was returned.
  bool truncated = false;
};

/// Sort by estimate (descending for MostPositive, ascending for
/// MostNegative), ties by ascending train id, keep the first k.
Ranking rank_influences(std::span<const InfluenceRecord> records, std::size_t k, RankOrder order);

struct OracleOptions {
  /// Refuse datasets larger than max_train unless forced.
  std::size_t max_train = 2000;
  bool force = false;
  unsigned jobs = 1;
};

/// Leave-one-out ground truth. f_D is trained once; each f_{D \ z_i} is
/// trained on first use with the same initialization and schedule minus z_i,
/// then cached.
class LooOracle {
 public:
  LooOracle(const Dataset& train_set, TrainConfig config, ModelConfig model_config,
            OracleOptions options = {});

  const TrainedModel& full_model() const noexcept { return full_; }
  const TrainedModel& loo_model(std::uint64_t train_id);
  /// Trains every missing leave-one-out model, up to `jobs` at a time.
  void prepare(std::span<const std::uint64_t> train_ids);

  OracleRecord record(const Instance& target, std::uint64_t train_id);
  std::vector<OracleRecord> records(const Instance& target, std::span<const std::uint64_t> train_ids);

  std::size_t retrain_count() const;

 private:
  const Dataset& train_set_;
  TrainConfig config_;
  ModelConfig model_config_;
  OracleOptions options_;
  TrainedModel full_;
  mutable std::mutex mutex_;
  std::map<std::uint64_t, std::shared_ptr<const TrainedModel>> loo_;
};

OracleRecord true_influence_loo(const Dataset& train_set, const TrainConfig& config,
                                const ModelConfig& model_config, const Instance& target,
                                std::uint64_t train_id, const OracleOptions& options = {});

void write_influence_csv(std::span<const InfluenceRecord> records, std::ostream& out);
void write_oracle_csv(std::span<const OracleRecord> records, std::ostream& out);
void write_histogram_csv(const Histogram& histogram, std::ostream& out);

}  // namespace turnover
