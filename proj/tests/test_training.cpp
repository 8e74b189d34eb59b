#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "support.hpp"
#include "turnover/error.hpp"
#include "turnover/loss.hpp"
#include "turnover/training.hpp"

using namespace turnover;
using turnover::testing::Gen;

namespace {

// Points labeled by the side of x0 + x1 = 0, with a margin around the line.
Dataset separable(Gen& gen, std::size_t n) {
  std::vector<Instance> out;
  while (out.size() < n) {
    const Vector x = gen.vector(2, -3.0, 3.0);
    const double s = x[0] + x[1];
    if (std::abs(s) < 0.5) continue;
    out.push_back({0, x, s > 0 ? 1u : 0u});
  }
  return Dataset(std::move(out), 2);
}

TrainConfig small_config(std::uint64_t seed, bool turnover = true) {
  TrainConfig c;
  c.learning_rate = 0.05;
  c.momentum = 0.9;
  c.batch_size = 10;
  c.epochs = 10;
  c.shuffle_seed = seed;
  c.init_seed = seed;
  if (turnover) c.turnover = ModelConfig::mlp({2, 16, 16, 2}).mask_plan(seed);
  return c;
}

// Plain SGD written against the public forward/backward API: the same
// schedule, the excluded id removed from its batch, mean of the rest.
ModelParams reference_train(const Dataset& data, const TrainConfig& config, const ModelConfig& model,
                            std::uint64_t excluded) {
  ModelParams p = init_params(model, config.init_seed);
  Gradients velocity = Gradients::zeros_like(p);
  for (const auto& epoch : make_schedule(data.size(), config)) {
    for (const auto& batch : epoch) {
      Gradients g = Gradients::zeros_like(p);
      std::size_t used = 0;
      for (auto id : batch) {
        if (id == excluded) continue;
        const auto fwd = forward(p, model, data[id].features);
        g.add(backward(p, model, fwd.cache, data[id].label));
        ++used;
      }
      if (used == 0) continue;
      g.scale(1.0 / static_cast<double>(used));
      for (std::size_t l = 0; l < p.weights.size(); ++l) {
        auto w = p.weights[l].values();
        auto v = velocity.weights[l].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config.momentum * v[i] + g.weights[l].values()[i];
          w[i] -= config.learning_rate * v[i];
        }
        for (std::size_t i = 0; i < p.biases[l].size(); ++i) {
          velocity.biases[l][i] = config.momentum * velocity.biases[l][i] + g.biases[l][i];
          p.biases[l][i] -= config.learning_rate * velocity.biases[l][i];
        }
      }
    }
  }
  return p;
}

}  // namespace

TEST(Schedule, PartitionsEveryEpoch) {
  TrainConfig c;
  c.batch_size = 3;
  c.epochs = 4;
  const auto s = make_schedule(10, c);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& epoch : s) {
    ASSERT_EQ(epoch.size(), 4u);
    EXPECT_EQ(epoch[0].size(), 3u);
    EXPECT_EQ(epoch[1].size(), 3u);
    EXPECT_EQ(epoch[2].size(), 3u);
    EXPECT_EQ(epoch[3].size(), 1u);
    std::vector<std::uint64_t> all;
    for (const auto& b : epoch) all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    for (std::uint64_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  }
}

TEST(Schedule, DeterministicInSeed) {
  TrainConfig c;
  c.shuffle_seed = 1;
  EXPECT_EQ(make_schedule(100, c), make_schedule(100, c));
  TrainConfig d = c;
  d.shuffle_seed = 2;
  EXPECT_NE(make_schedule(100, c)[0], make_schedule(100, d)[0]);
}

TEST(Schedule, EpochsUseDifferentPermutations) {
  TrainConfig c;
  c.epochs = 2;
  const auto s = make_schedule(50, c);
  EXPECT_NE(s[0], s[1]);
}

TEST(Schedule, PartitionPropertyOnRandomSizes) {
  Gen gen(51);
  for (int trial = 0; trial < 50; ++trial) {
    TrainConfig c;
    c.batch_size = gen.index(1, 20);
    c.epochs = gen.index(1, 3);
    c.shuffle_seed = gen.u64();
    const std::size_t n = gen.index(1, 200);
    for (const auto& epoch : make_schedule(n, c)) {
      std::vector<std::uint64_t> all;
      for (const auto& b : epoch) {
        EXPECT_LE(b.size(), c.batch_size);
        EXPECT_FALSE(b.empty());
        all.insert(all.end(), b.begin(), b.end());
      }
      std::sort(all.begin(), all.end());
      ASSERT_EQ(all.size(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
    }
  }
}

TEST(Schedule, EmptyDatasetThrows) {
  EXPECT_THROW(make_schedule(0, TrainConfig{}), ConfigError);
}

TEST(Train, BitIdenticalAcrossRuns) {
  Gen gen(52);
  const Dataset data = gen.blobs(60, 2, 1.0);
  const auto model = ModelConfig::mlp({2, 16, 16, 2});
  const auto a = train(data, small_config(3), model);
  const auto b = train(data, small_config(3), model);
  EXPECT_EQ(a.model, b.model);
  EXPECT_NE(a.model, train(data, small_config(4), model).model);
}

TEST(Train, ExclusionMatchesReferenceSchedule) {
  Gen gen(53);
  const Dataset data = gen.blobs(47, 2, 1.0);
  const auto model = ModelConfig::mlp({2, 8, 8, 2});
  const auto config = small_config(5, false);
  for (std::uint64_t excluded : {0u, 13u, 46u}) {
    TrainOptions options;
    options.excluded_id = excluded;
    EXPECT_EQ(train(data, config, model, options).model.params,
              reference_train(data, config, model, excluded));
  }
}

TEST(Train, ExclusionDiffersFromPlainRemoval) {
  Gen gen(54);
  const Dataset data = gen.blobs(40, 2, 1.0);
  const auto model = ModelConfig::mlp({2, 8, 8, 2});
  const auto config = small_config(6, false);
  TrainOptions options;
  options.excluded_id = 7;
  const std::vector<std::uint64_t> removed{7};
  EXPECT_NE(train(data, config, model, options).model.params,
            train(data.without(removed), config, model).model.params);
}

TEST(Train, SingletonBatchExcludedIsSkipped) {
  const Dataset data({{0, {1.0, 0.0}, 0}, {0, {-1.0, 0.0}, 1}}, 2);
  TrainConfig c = small_config(1, false);
  c.batch_size = 1;
  c.epochs = 3;
  TrainOptions options;
  options.excluded_id = 1;
  EXPECT_EQ(train(data, c, ModelConfig::mlp({2, 4, 2}), options).log.skipped_batches, 3u);
}

TEST(Train, ExcludedIdOutsideDatasetThrows) {
  const Dataset data({{0, {1.0, 0.0}, 0}}, 2);
  TrainOptions options;
  options.excluded_id = 5;
  EXPECT_THROW(train(data, small_config(1, false), ModelConfig::mlp({2, 4, 2}), options), DataError);
}

TEST(Train, ShapeMismatchThrows) {
  const Dataset data({{0, {1.0, 0.0, 2.0}, 0}}, 2);
  EXPECT_THROW(train(data, small_config(1, false), ModelConfig::mlp({2, 4, 2})), ShapeError);
}

TEST(Train, PlanMustMatchModel) {
  Gen gen(55);
  TrainConfig c = small_config(1);
  c.turnover = ModelConfig::mlp({2, 8, 2}).mask_plan(1);
  EXPECT_THROW(train(gen.blobs(10, 2, 1.0), c, ModelConfig::mlp({2, 16, 16, 2})), ConfigError);
}

TEST(Train, SeparablePointsReachHighAccuracy) {
  Gen gen(56);
  const Dataset data = separable(gen, 200);
  TrainConfig c = small_config(7);
  c.epochs = 30;
  const auto result = train(data, c, ModelConfig::mlp({2, 16, 16, 2}));
  EXPECT_GE(evaluate(result.model.params, result.model.config, data).accuracy, 0.95);
}

TEST(Train, StepDecayFreezesLaterEpochs) {
  Gen gen(57);
  const Dataset data = gen.blobs(30, 2, 1.0);
  const auto model = ModelConfig::mlp({2, 8, 2});
  TrainConfig one = small_config(8, false);
  one.momentum = 0.0;
  one.epochs = 1;
  TrainConfig two = one;
  two.epochs = 2;
  two.decay = StepDecay{1, 1e-300};
  const auto a = train(data, one, model).model.params;
  const auto b = train(data, two, model).model.params;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.weights[l].size(); ++i) {
      EXPECT_NEAR(a.weights[l].values()[i], b.weights[l].values()[i], 1e-12);
    }
  }
  two.decay = StepDecay{0, 0.5};
  EXPECT_THROW(train(data, two, model), ConfigError);
}

TEST(Train, HugeStepIsFlaggedAsDivergent) {
  Gen gen(58);
  const Dataset data = gen.blobs(50, 2, 1.0);
  TrainConfig c = small_config(9, false);
  c.learning_rate = 50.0;
  c.epochs = 5;
  const auto result = train(data, c, ModelConfig::mlp({2, 16, 16, 2}), {.monitor = &data});
  EXPECT_TRUE(result.log.diverged);
  const auto calm = train(data, small_config(9, false), ModelConfig::mlp({2, 16, 16, 2}), {.monitor = &data});
  EXPECT_FALSE(calm.log.diverged);
}

TEST(Train, InitialParamsAreUsedWhenGiven) {
  Gen gen(59);
  const Dataset data = gen.blobs(20, 2, 1.0);
  const auto model = ModelConfig::mlp({2, 8, 2});
  const auto start = gen.dense_params(model);
  TrainConfig c = small_config(1, false);
  c.epochs = 1;
  c.learning_rate = 1e-300;
  c.momentum = 0.0;
  TrainOptions options;
  options.initial = &start;
  EXPECT_EQ(train(data, c, model, options).model.params.weights, start.weights);
  ModelParams wrong = start;
  wrong.weights.pop_back();
  options.initial = &wrong;
  EXPECT_THROW(train(data, c, model, options), ShapeError);
}

TEST(Evaluate, ConstantPredictorIsAtChance) {
  Gen gen(60);
  const Dataset data = gen.blobs(100, 2, 1.0);
  const auto model = ModelConfig::mlp({2, 8, 2});
  const auto e = evaluate(init_params(model, 1), model, data);
  EXPECT_EQ(e.accuracy, 0.5);
  EXPECT_NEAR(e.mean_loss, std::log(2.0), 1e-12);
}

TEST(Evaluate, MemorizedSetIsPerfect) {
  const Dataset data({{0, {1.0, 0.0}, 0}, {0, {-1.0, 0.0}, 1}}, 2);
  const auto model = ModelConfig::mlp({2, 2, 2});
  ModelParams p = init_params(model, 1);
  p.weights[0] = Matrix{{1, 0}, {-1, 0}};
  p.biases[0] = {0, 0};
  p.weights[1] = Matrix{{5, 0}, {0, 5}};
  EXPECT_EQ(evaluate(p, model, data).accuracy, 1.0);
}

TEST(Evaluate, MeanLossIsAverageOfLossOn) {
  Gen gen(61);
  const Dataset data = gen.blobs(40, 3, 1.0, 3);
  const auto model = ModelConfig::mlp({3, 6, 3});
  const auto p = gen.dense_params(model);
  double total = 0.0;
  for (const auto& inst : data.instances()) total += loss_on(p, model, inst.features, inst.label);
  EXPECT_NEAR(evaluate(p, model, data).mean_loss, total / 40.0, 1e-12);
}

TEST(Evaluate, EmptyDatasetThrows) {
  const auto model = ModelConfig::mlp({2, 2, 2});
  EXPECT_THROW(evaluate(init_params(model, 1), model, Dataset{}), DataError);
}

TEST(Curves, InitialLossesAreLnClasses) {
  Gen gen(62);
  const Dataset train_set = gen.blobs(50, 2, 1.0, 3);
  const Dataset test_set = gen.blobs(50, 2, 1.0, 3);
  TrainConfig c = small_config(2);
  const auto model_config = ModelConfig::mlp({2, 16, 16, 3});
  c.turnover = model_config.mask_plan(2);
  const auto result = train(train_set, c, model_config, {.monitor = &test_set});
  ASSERT_EQ(result.log.records.size(), c.epochs + 1);
  const auto& first = result.log.records.front();
  EXPECT_EQ(first.epoch, 0u);
  for (double loss : {first.masked_train_loss, first.flipped_train_loss, first.full_train_loss, first.test_loss}) {
    EXPECT_NEAR(loss, std::log(3.0), 0.1);
  }
  EXPECT_EQ(result.log.records.back().epoch, c.epochs);
}

TEST(Curves, MaskedBelowFlippedAtEnd) {
  Gen gen(63);
  int below = 0;
  const int runs = 20;
  for (int seed = 0; seed < runs; ++seed) {
    const Dataset train_set = gen.blobs(100, 2, 1.0);
    TrainConfig c = small_config(static_cast<std::uint64_t>(seed));
    c.epochs = 20;
    const auto model = train(train_set, c, ModelConfig::mlp({2, 16, 16, 2})).model;
    const auto record = log_curves(model, train_set, train_set);
    below += record.masked_train_loss < record.flipped_train_loss;
  }
  EXPECT_GE(below, 19);
}

TEST(Curves, PlainModelReportsFullLossForAllThree) {
  Gen gen(64);
  const Dataset data = gen.blobs(30, 2, 1.0);
  const auto model = train(data, small_config(1, false), ModelConfig::mlp({2, 8, 2})).model;
  const auto r = log_curves(model, data, data);
  EXPECT_EQ(r.masked_train_loss, r.full_train_loss);
  EXPECT_EQ(r.flipped_train_loss, r.full_train_loss);
}

TEST(Curves, CsvHasOneRowPerRecord) {
  std::ostringstream out;
  write_curves_csv({CurveRecord{0, 0.5, 0.7, 0.6, 0.65, 0.5}, CurveRecord{1, 0.25, 0.7, 0.5, 0.6, 0.75}}, out);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(text.rfind("epoch,masked_train_loss,flipped_train_loss,full_train_loss,test_loss,test_accuracy\n", 0), 0u);
  EXPECT_NE(text.find("\n1,0.25,0.69999999999999996,"), std::string::npos);
}
