// turnover: train turn-over dropout models and estimate training-data influence.
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "turnover/error.hpp"
#include "turnover/experiment.hpp"

namespace {

int exit_code(turnover::ErrorKind kind) {
  switch (kind) {
    case turnover::ErrorKind::Usage: return 1;
    case turnover::ErrorKind::Data: return 2;
    case turnover::ErrorKind::Precondition: return 3;
  }
  return 1;
}

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool force = false;
  std::optional<double> fraction;
  std::optional<std::size_t> top_k;
  std::string estimator = "standard";
  std::optional<std::string> split;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "Experiment config (JSON)");
  sub->add_option("--out", f.out, "Run directory")->required();
  sub->add_option("--seed", f.seed, "Override the config seed");
  sub->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--force", f.force, "Allow oversized leave-one-out runs or replace a run's config");
  sub->add_option("--fraction", f.fraction, "Removal fraction for cleanse")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--top-k", f.top_k, "Training instances reported per misclassified target")
      ->check(CLI::PositiveNumber);
  sub->add_option("--estimator", f.estimator, "Influence estimator")
      ->check(CLI::IsMember({"standard", "fullnet-baseline"}));
  sub->add_option("--split", f.split, "Target split for influence and interpret")
      ->check(CLI::IsMember({"val", "test"}));
}

turnover::CommandOptions to_options(const Flags& f) {
  turnover::CommandOptions o;
  if (!f.config.empty()) o.config_path = f.config;
  o.seed = f.seed;
  o.jobs = f.jobs;
  o.force = f.force;
  o.fraction = f.fraction;
  o.top_k = f.top_k;
  o.estimator = f.estimator == "standard" ? turnover::Estimator::Standard
                                          : turnover::Estimator::FullnetBaseline;
  if (f.split) o.split = *f.split == "val" ? turnover::TargetSplit::Val : turnover::TargetSplit::Test;
  return o;
}

const std::map<std::string, std::string> kDescriptions = {
    {"train", "Train a turn-over model and write checkpoint.json"},
    {"curves", "Per-epoch train/test losses of the full, masked and flipped networks"},
    {"influence", "Influence of every training instance on each configured target"},
    {"self-influence", "Influence of each training instance on itself, plus a histogram"},
    {"interpret", "Most responsible training instances for each misclassified target"},
    {"loo-validate", "Compare estimates against leave-one-out retraining"},
    {"cleanse", "Remove harmful instances, retrain and compare against baselines"},
    {"report", "Collect every summary into report.json"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turn-over dropout training and influence estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(TURNOVER_VERSION));

  Flags flags;
  std::string selected;
  for (const auto& name : turnover::command_names()) {
    auto* sub = app.add_subcommand(name, kDescriptions.at(name));
    add_common(sub, flags);
    sub->callback([&selected, name] { selected = name; });
  }

  std::string replay_from;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest into a fresh directory and compare outputs");
  replay->add_option("--from", replay_from, "Run directory holding manifest.json")->required();
  replay->add_option("--out", flags.out, "Empty directory for the re-run")->required();
  replay->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
  replay->callback([&selected] { selected = "replay"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (selected == "replay") {
      const auto r = turnover::replay(replay_from, flags.out, flags.jobs);
      std::cout << "replayed " << r.commands << " command(s), compared " << r.compared << " output(s)\n";
      for (const auto& m : r.mismatches) std::cout << "MISMATCH " << m << '\n';
      return r.mismatches.empty() ? 0 : 2;
    }
    const auto result = turnover::run_command(selected, flags.out, to_options(flags));
    for (const auto& line : result.summary) std::cout << line << '\n';
    return 0;
  } catch (const turnover::Error& e) {
    std::cerr << "turnover " << selected << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "turnover " << selected << ": " << e.what() << '\n';
    return 2;
  }
}
