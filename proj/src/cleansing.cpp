#include "turnover/cleansing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "turnover/csv.hpp"
#include "turnover/error.hpp"
#include "turnover/parallel.hpp"
#include "turnover/rng.hpp"
#include "turnover/stats.hpp"

namespace turnover {

std::string_view variant_name(CleansingVariant variant) {
  switch (variant) {
    case CleansingVariant::Cleanse:
      return "cleanse";
    case CleansingVariant::RandomRemoval:
      return "random_removal";
    case CleansingVariant::NoCleansing:
      return "no_cleansing";
  }
  return "unknown";
}

std::size_t removal_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("removal fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  if (count == 0) {
    throw ConfigError("removal fraction " + std::to_string(fraction) + " of " + std::to_string(n) +
                      " instances removes nothing");
  }
  return count;
}

std::vector<std::uint64_t> select_harmful(std::span<const double> mean_influences, double fraction) {
  const std::size_t count = removal_count(mean_influences.size(), fraction);
  std::vector<std::uint64_t> ids(mean_influences.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](std::uint64_t a, std::uint64_t b) {
    if (mean_influences[a] != mean_influences[b]) return mean_influences[a] < mean_influences[b];
    return a < b;
  });
  ids.resize(count);
  return ids;
}

std::vector<std::uint64_t> select_random(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw ConfigError("cannot remove more instances than exist");
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  CounterRng rng(seed, streams::kRandomRemoval);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

double removal_precision(std::span<const std::uint64_t> removed,
                         std::span<const std::uint64_t> flipped) {
  if (removed.empty()) return 0.0;
  const std::set<std::uint64_t> truth(flipped.begin(), flipped.end());
  const auto hits = std::count_if(removed.begin(), removed.end(),
                                  [&](std::uint64_t id) { return truth.count(id) > 0; });
  return static_cast<double>(hits) / static_cast<double>(removed.size());
}

void CleansingReport::summarize() {
  std::vector<double> acc, loss;
  for (const auto& r : runs) {
    acc.push_back(r.test_accuracy);
    loss.push_back(r.test_loss);
  }
  mean_accuracy = mean(acc);
  sd_accuracy = sample_sd(acc);
  mean_loss = mean(loss);
  sd_loss = sample_sd(loss);
}

TrainConfig seeded(const TrainConfig& base, std::uint64_t seed) {
  TrainConfig config = base;
  config.init_seed = seed;
  config.shuffle_seed = seed;
  if (config.turnover) config.turnover->global_seed = seed;
  return config;
}

CleansingExperiment run_cleansing_experiment(const Dataset& train_set, const Dataset& val_set,
                                             const Dataset& test_set, double fraction,
                                             std::span<const std::uint64_t> seeds,
                                             const CleansingConfig& config) {
  if (!config.train.turnover) {
    throw PreconditionError("cleansing scores instances with a turn-over model; the train config has no mask plan");
  }
  if (seeds.size() < 2) throw ConfigError("cleansing needs at least two seeds");
  if (val_set.empty() || test_set.empty()) throw DataError("cleansing needs validation and test sets");
  const std::size_t count = removal_count(train_set.size(), fraction);

  CleansingExperiment exp;
  exp.cleanse = {CleansingVariant::Cleanse, fraction, {}, 0, 0, 0, 0};
  exp.random_removal = {CleansingVariant::RandomRemoval, fraction, {}, 0, 0, 0, 0};
  exp.no_cleansing = {CleansingVariant::NoCleansing, 0.0, {}, 0, 0, 0, 0};
  exp.cleanse.runs.resize(seeds.size());
  exp.random_removal.runs.resize(seeds.size());
  exp.no_cleansing.runs.resize(seeds.size());
  exp.mean_influences.resize(seeds.size());
  exp.scorers.resize(seeds.size());

  const auto train_ids = train_set.ids();
  parallel_for(seeds.size(), config.jobs, [&](std::size_t s) {
    const std::uint64_t seed = seeds[s];
    const TrainConfig scoring = seeded(config.train, seed);
    TrainConfig plain = scoring;
    plain.turnover.reset();

    exp.scorers[s] = train(train_set, scoring, config.model).model;
    exp.mean_influences[s] =
        mean_influence_on_set(exp.scorers[s], val_set, train_ids, config.estimate);

    auto run = [&](std::vector<std::uint64_t> removed) {
      SeedOutcome outcome;
      outcome.seed = seed;
      const Dataset kept = removed.empty() ? train_set : train_set.without(removed);
      const auto model = train(kept, plain, config.model).model;
      const auto eval = evaluate(model.params, model.config, test_set);
      outcome.test_accuracy = eval.accuracy;
      outcome.test_loss = eval.mean_loss;
      outcome.removed_ids = std::move(removed);
      return outcome;
    };
    exp.cleanse.runs[s] = run(select_harmful(exp.mean_influences[s], fraction));
    exp.random_removal.runs[s] = run(select_random(train_set.size(), count, seed));
    exp.no_cleansing.runs[s] = run({});
  });

  exp.cleanse.summarize();
  exp.random_removal.summarize();
  exp.no_cleansing.summarize();

  const std::set<std::uint64_t> flipped(train_set.flipped_ids().begin(), train_set.flipped_ids().end());
  std::size_t hits = 0, removed = 0;
  for (const auto& r : exp.cleanse.runs) {
    for (auto id : r.removed_ids) hits += flipped.count(id);
    removed += r.removed_ids.size();
  }
  exp.pooled_precision = removed == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(removed);
  return exp;
}

std::vector<StabilityRow> ranking_stability(const TrainedModel& model, const Dataset& train_set,
                                            const Dataset& val_set,
                                            std::span<const std::size_t> val_sizes, double fraction,
                                            const EstimateOptions& options) {
  const auto ids = train_set.ids();
  const InfluenceEstimator estimator(model, options);
  const auto full = estimator.mean_on_set(val_set, ids);
  const auto full_removed = select_harmful(full, fraction);
  const std::set<std::uint64_t> full_set(full_removed.begin(), full_removed.end());
  std::vector<StabilityRow> rows;
  for (std::size_t n : val_sizes) {
    n = std::min(n, val_set.size());
    std::vector<Instance> head(val_set.instances().begin(),
                               val_set.instances().begin() + static_cast<std::ptrdiff_t>(n));
    const Dataset subset(std::move(head), val_set.n_classes());
    const auto partial = estimator.mean_on_set(subset, ids);
    const auto removed = select_harmful(partial, fraction);
    const auto overlap = std::count_if(removed.begin(), removed.end(),
                                       [&](std::uint64_t id) { return full_set.count(id) > 0; });
    rows.push_back({n, spearman(partial, full),
                    static_cast<double>(overlap) / static_cast<double>(full_removed.size())});
  }
  return rows;
}

void write_cleansing_csv(const CleansingExperiment& experiment, std::ostream& out) {
  out << "variant,seed,test_accuracy,test_loss\n";
  for (const auto* report : {&experiment.random_removal, &experiment.no_cleansing, &experiment.cleanse}) {
    const auto name = variant_name(report->variant);
    for (const auto& r : report->runs) {
      out << name << ',' << r.seed << ',' << csv::real(r.test_accuracy) << ','
          << csv::real(r.test_loss) << '\n';
    }
    out << name << ",mean," << csv::real(report->mean_accuracy) << ',' << csv::real(report->mean_loss)
        << '\n';
    out << name << ",sd," << csv::real(report->sd_accuracy) << ',' << csv::real(report->sd_loss) << '\n';
  }
}

}  // namespace turnover
