#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "support.hpp"
#include "turnover/cleansing.hpp"
#include "turnover/error.hpp"
#include "turnover/synthetic.hpp"

using namespace turnover;
using turnover::testing::Gen;

namespace {

CleansingConfig small_cleansing(std::size_t hidden = 16, std::size_t epochs = 15) {
  CleansingConfig c;
  c.model = ModelConfig::mlp({2, hidden, hidden, 2});
  c.train.learning_rate = 0.05;
  c.train.momentum = 0.0;
  c.train.batch_size = 10;
  c.train.epochs = epochs;
  c.train.turnover = c.model.mask_plan(0);
  return c;
}

Splits noisy_blobs(std::size_t n_train, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.shape = GaussianBlobs{{{-1.5, -1.5}, {1.5, 1.5}}, 1.0};
  spec.n_train = n_train;
  spec.n_val = 100;
  spec.n_test = 200;
  spec.seed = seed;
  spec.label_noise = LabelNoise{0.1, seed};
  return generate_synthetic(spec);
}

}  // namespace

TEST(SelectHarmful, SingleMinimum) {
  // Index i holds the mean influence of train id i.
  const std::vector<double> means{-0.5, 0.1, -0.2, 0.3};
  EXPECT_EQ(select_harmful(means, 0.25), (std::vector<std::uint64_t>{0}));
  EXPECT_EQ(select_harmful(means, 0.5), (std::vector<std::uint64_t>{0, 2}));
}

TEST(SelectHarmful, TiesGoToLowestId) {
  const std::vector<double> equal(4, 0.7);
  EXPECT_EQ(select_harmful(equal, 0.25), (std::vector<std::uint64_t>{0}));
}

TEST(SelectHarmful, ZeroRemovalsAndBadFractionsThrow) {
  const std::vector<double> means{1.0, 2.0, 3.0};
  EXPECT_THROW(select_harmful(means, 0.1), ConfigError);
  EXPECT_THROW(select_harmful(means, 0.0), ConfigError);
  EXPECT_THROW(select_harmful(means, 1.0), ConfigError);
}

TEST(SelectHarmful, SizeAndMinimalityProperty) {
  Gen gen(111);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = gen.index(10, 300);
    std::vector<double> means(n);
    for (auto& m : means) m = std::round(gen.real(-5, 5));
    const double fraction = gen.real(0.1, 0.9);
    const auto removed = select_harmful(means, fraction);
    ASSERT_EQ(removed.size(), removal_count(n, fraction));
    double worst_removed = -1e300;
    for (auto id : removed) worst_removed = std::max(worst_removed, means[id]);
    const std::set<std::uint64_t> taken(removed.begin(), removed.end());
    for (std::uint64_t i = 0; i < n; ++i) {
      if (!taken.count(i)) EXPECT_GE(means[i], worst_removed);
    }
  }
}

TEST(SelectRandom, DeterministicSortedAndDistinct) {
  const auto a = select_random(1000, 50, 7);
  EXPECT_EQ(a, select_random(1000, 50, 7));
  EXPECT_NE(a, select_random(1000, 50, 8));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::uint64_t>(a.begin(), a.end()).size(), 50u);
  for (auto id : a) EXPECT_LT(id, 1000u);
  EXPECT_THROW(select_random(3, 4, 1), ConfigError);
}

TEST(RemovalPrecision, CountsHits) {
  const std::vector<std::uint64_t> removed{1, 4, 9, 12};
  const std::vector<std::uint64_t> flipped{4, 5, 12};
  EXPECT_EQ(removal_precision(removed, flipped), 0.5);
}

TEST(Seeded, SetsEverySeed) {
  TrainConfig base = small_cleansing().train;
  const auto c = seeded(base, 42);
  EXPECT_EQ(c.init_seed, 42u);
  EXPECT_EQ(c.shuffle_seed, 42u);
  EXPECT_EQ(c.turnover->global_seed, 42u);
}

TEST(Experiment, ReportShapesAndNoiseTargeting) {
  const auto splits = noisy_blobs(300, 3);
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto exp = run_cleansing_experiment(splits.train, splits.val, splits.test, 0.05, seeds,
                                            small_cleansing());
  ASSERT_EQ(exp.cleanse.runs.size(), 2u);
  ASSERT_EQ(exp.random_removal.runs.size(), 2u);
  ASSERT_EQ(exp.no_cleansing.runs.size(), 2u);
  ASSERT_EQ(exp.mean_influences.size(), 2u);
  ASSERT_EQ(exp.scorers.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_EQ(exp.cleanse.runs[s].removed_ids.size(), 15u);
    EXPECT_EQ(exp.random_removal.runs[s].removed_ids.size(), 15u);
    EXPECT_TRUE(exp.no_cleansing.runs[s].removed_ids.empty());
    EXPECT_EQ(exp.cleanse.runs[s].removed_ids, select_harmful(exp.mean_influences[s], 0.05));
    EXPECT_EQ(exp.mean_influences[s],
              mean_influence_on_set(exp.scorers[s], splits.val, splits.train.ids()));
  }
  EXPECT_GT(exp.pooled_precision, 0.1);
  EXPECT_EQ(exp.cleanse.variant, CleansingVariant::Cleanse);
  EXPECT_EQ(exp.cleanse.removal_fraction, 0.05);

  const auto again = run_cleansing_experiment(splits.train, splits.val, splits.test, 0.05, seeds,
                                              small_cleansing());
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_EQ(again.random_removal.runs[s].removed_ids, exp.random_removal.runs[s].removed_ids);
    EXPECT_EQ(again.cleanse.runs[s].test_loss, exp.cleanse.runs[s].test_loss);
  }

  std::ostringstream out;
  write_cleansing_csv(exp, out);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("variant,seed,test_accuracy,test_loss\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 4);
  EXPECT_NE(text.find("\ncleanse,mean,"), std::string::npos);
  EXPECT_NE(text.find("\nrandom_removal,sd,"), std::string::npos);
  EXPECT_NE(text.find("\nno_cleansing,1,"), std::string::npos);
}

TEST(Experiment, PreconditionsAreChecked) {
  const auto splits = noisy_blobs(100, 4);
  const std::vector<std::uint64_t> one{1};
  const std::vector<std::uint64_t> two{1, 2};
  EXPECT_THROW(run_cleansing_experiment(splits.train, splits.val, splits.test, 0.05, one, small_cleansing()),
               ConfigError);
  EXPECT_THROW(run_cleansing_experiment(splits.train, splits.val, splits.test, 0.001, two, small_cleansing()),
               ConfigError);
  CleansingConfig plain = small_cleansing();
  plain.train.turnover.reset();
  EXPECT_THROW(run_cleansing_experiment(splits.train, splits.val, splits.test, 0.05, two, plain),
               PreconditionError);
}

TEST(Report, SummaryIsMeanAndSampleSd) {
  CleansingReport r;
  r.runs = {SeedOutcome{1, {}, 0.5, 1.0}, SeedOutcome{2, {}, 0.7, 3.0}};
  r.summarize();
  EXPECT_DOUBLE_EQ(r.mean_accuracy, 0.6);
  EXPECT_DOUBLE_EQ(r.mean_loss, 2.0);
  EXPECT_NEAR(r.sd_loss, std::sqrt(2.0), 1e-15);
}

TEST(Stability, FullSizeAgreesWithItself) {
  const auto splits = noisy_blobs(200, 5);
  CleansingConfig c = small_cleansing();
  const auto model = train(splits.train, seeded(c.train, 1), c.model).model;
  const std::vector<std::size_t> sizes{25, 50, 100};
  const auto rows = ranking_stability(model, splits.train, splits.val, sizes, 0.05);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].val_size, 25u);
  EXPECT_NEAR(rows[2].spearman_vs_full, 1.0, 1e-12);
  EXPECT_EQ(rows[2].removed_overlap, 1.0);
  for (const auto& r : rows) {
    EXPECT_GE(r.removed_overlap, 0.0);
    EXPECT_LE(r.removed_overlap, 1.0);
  }
}
