#pragma once
// Experiment configs, the run directory, and the subcommands behind the CLI.
//
// Run directory layout:
//   config.json        resolved experiment config
//   checkpoint.json    turn-over model written by `train`
//   curves.csv         per-epoch learning curves
//   influence/*.csv    estimator outputs
//   oracle/*.csv       leave-one-out ground truth and correlation summary
//   cleansing/*.csv    cleansing report and validation-size sweep
//   report.json        summary assembled by `report`
//   manifest.json      config hash, seeds, versions, timings, output hashes
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "turnover/dataset.hpp"
#include "turnover/influence.hpp"
#include "turnover/serialize.hpp"
#include "turnover/synthetic.hpp"
#include "turnover/training.hpp"

namespace turnover {

struct CsvSource {
  std::filesystem::path path;
  bool header = true;
  std::size_t n_classes = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint64_t split_seed = 0;
  bool operator==(const CsvSource&) const = default;
};

using DataSource = std::variant<SyntheticSpec, CsvSource>;

enum class TargetSplit { Val, Test };

struct InfluenceSettings {
  /// Target ids in `split` for the `influence` command.
  std::vector<std::uint64_t> targets{0};
  TargetSplit split = TargetSplit::Test;
  std::size_t batch_size = 64;
  bool operator==(const InfluenceSettings&) const = default;
};

struct InterpretSettings {
  TargetSplit split = TargetSplit::Val;
  std::size_t top_k = 10;
  bool operator==(const InterpretSettings&) const = default;
};

struct LooSettings {
  /// The first n_targets test instances are the targets.
  std::size_t n_targets = 5;
  /// Seeds seed, seed+1, ..., seed+n_seeds-1.
  std::size_t n_seeds = 3;
  bool operator==(const LooSettings&) const = default;
};

struct CleansingSettings {
  double fraction = 0.05;
  std::size_t n_seeds = 4;
  std::vector<std::size_t> val_sizes{50, 100, 200};
  bool operator==(const CleansingSettings&) const = default;
};

struct ExperimentConfig {
  DataSource data = SyntheticSpec{};
  ModelConfig model = ModelConfig::mlp({2, 16, 16, 2});
  /// Optimizer settings. Seeds and the mask plan are filled in from `seed`
  /// and `mask_scheme`; whatever the stored config holds there is ignored.
  TrainConfig train;
  MaskScheme mask_scheme = DirectScheme{};
  std::uint64_t seed = 0;
  InfluenceSettings influence;
  InterpretSettings interpret;
  LooSettings loo;
  CleansingSettings cleansing;

  /// Turn-over training with init, shuffle, and mask seeds all equal to `s`.
  TrainConfig turnover_train(std::uint64_t s) const;
  /// Same without a mask plan.
  TrainConfig plain_train(std::uint64_t s) const;
  std::vector<std::uint64_t> seeds(std::size_t count) const;
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

Json config_to_json(const ExperimentConfig& config);
/// Throws ConfigError on unknown keys or invalid values.
ExperimentConfig config_from_json(const Json& j);
/// Relative CSV paths in the file resolve against the file's directory and
/// are stored absolute.
ExperimentConfig load_config(const std::filesystem::path& path);
/// Hash of the canonical JSON form.
std::string config_hash(const ExperimentConfig& config);

/// Synthetic splits, or the CSV file cut by its split seed.
Splits load_splits(const ExperimentConfig& config);

struct CommandOptions {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool force = false;
  std::optional<double> fraction;
  std::optional<std::size_t> top_k;
  Estimator estimator = Estimator::Standard;
  std::optional<TargetSplit> split;
};

struct CommandResult {
  /// Paths relative to the run directory.
  std::vector<std::string> outputs;
  /// Human-readable lines for the terminal.
  std::vector<std::string> summary;
};

const std::vector<std::string>& command_names();

/// Runs one subcommand against the run directory `out` and appends it to the
/// manifest. The config comes from options.config_path, else out/config.json.
CommandResult run_command(const std::string& name, const std::filesystem::path& out,
                          const CommandOptions& options);

struct ReplayResult {
  std::size_t commands = 0;
  std::size_t compared = 0;
  std::vector<std::string> mismatches;
};

/// Re-runs every command recorded in from/manifest.json into `to`, using the
/// stored config, and compares every CSV byte for byte.
ReplayResult replay(const std::filesystem::path& from, const std::filesystem::path& to, unsigned jobs);

}  // namespace turnover
