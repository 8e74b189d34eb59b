#pragma once

// Mini-batch momentum SGD with per-instance turn-over masks. The whole run is
// a pure function of (dataset, seeds, config), which is what lets a
// leave-one-out retrain replay the exact same schedule.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "turnover/dataset.hpp"
#include "turnover/mask.hpp"
#include "turnover/network.hpp"

namespace turnover {

struct StepDecay {
  std::size_t every_epochs = 0;
  double factor = 0.1;

  bool operator==(const StepDecay&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 10;
  std::size_t epochs = 30;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t init_seed = 0;
  /// Absent: plain training with no masks.
  std::optional<MaskPlan> turnover;
  std::optional<StepDecay> decay;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// schedule[epoch][batch] lists instance ids.
using Schedule = std::vector<std::vector<std::vector<std::uint64_t>>>;

/// One seeded permutation of [0, n) per epoch, cut into batches of at most
/// batch_size.
Schedule make_schedule(std::size_t n, const TrainConfig& config);

struct CurveRecord {
  std::size_t epoch = 0;
  double masked_train_loss = 0.0;   // mean L(f^m(z), z)
  double flipped_train_loss = 0.0;  // mean L(f^m~(z), z)
  double full_train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;

  bool operator==(const CurveRecord&) const = default;
};

struct TrainLog {
  std::vector<CurveRecord> records;
  /// Batches emptied by the excluded instance.
  std::size_t skipped_batches = 0;
  /// Full train loss exceeded 10x its initial value at some logged epoch.
  bool diverged = false;
};

struct TrainOptions {
  /// Leave-one-out: the schedule is built for the full dataset and this id is
  /// dropped from its batch; every other batch is unchanged.
  std::optional<std::uint64_t> excluded_id;
  /// When set, one CurveRecord is logged per epoch against this test set.
  const Dataset* monitor = nullptr;
  /// Start from these params instead of init_params (fine-tuning).
  const ModelParams* initial = nullptr;
};

struct TrainResult {
  TrainedModel model;
  TrainLog log;
};

TrainResult train(const Dataset& data, const TrainConfig& config, const ModelConfig& model_config,
                  const TrainOptions& options = {});

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Full-network (unmasked) accuracy and mean cross-entropy.
Evaluation evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& data);

/// The four learning-curve losses of a turn-over model. Without a plan the
/// masked and flipped losses equal the full-network loss.
CurveRecord log_curves(const TrainedModel& model, const Dataset& train_set, const Dataset& test_set);

void write_curves_csv(const std::vector<CurveRecord>& records, std::ostream& out);

}  // namespace turnover
