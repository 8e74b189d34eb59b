#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "turnover/error.hpp"
#include "turnover/experiment.hpp"

using namespace turnover;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"({
  "data": {"synthetic": {
    "shape": {"kind": "gaussian_blobs", "means": [[-1.5, -1.5], [1.5, 1.5]], "stddev": 1.0},
    "n_train": 60, "n_val": 30, "n_test": 40, "seed": 2,
    "label_noise": {"rate": 0.1, "seed": 2}}},
  "model": {"layer_widths": [2, 8, 8, 2]},
  "train": {"learning_rate": 0.05, "momentum": 0.0, "batch_size": 10, "epochs": 4},
  "seed": 5,
  "influence": {"targets": [0, 3], "split": "test"},
  "interpret": {"split": "val", "top_k": 3},
  "loo": {"n_targets": 2, "n_seeds": 2},
  "cleansing": {"fraction": 0.1, "n_seeds": 2, "val_sizes": [10, 30]}
})";

// Far-apart blobs: the trained model makes no validation errors.
const char* kEasyConfig = R"({
  "data": {"synthetic": {
    "shape": {"kind": "gaussian_blobs", "means": [[-6, -6], [6, 6]], "stddev": 0.5},
    "n_train": 40, "n_val": 20, "n_test": 20, "seed": 1}},
  "model": {"layer_widths": [2, 8, 8, 2]},
  "train": {"learning_rate": 0.05, "momentum": 0.9, "batch_size": 10, "epochs": 10},
  "seed": 1
})";

class RunDir : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            (std::string("turnover_experiment_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = root_ / name;
    std::ofstream(p) << text;
    return p;
  }
  CommandOptions with_config(const fs::path& config) {
    CommandOptions o;
    o.config_path = config;
    return o;
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  static std::size_t lines(const fs::path& p) {
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  }

  fs::path root_;
};

}  // namespace

TEST_F(RunDir, AnalysisBeforeTrainNamesTheFix) {
  const auto config = write_config("c.json", kTinyConfig);
  try {
    run_command("influence", root_ / "run", with_config(config));
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("turnover train"), std::string::npos);
  }
}

TEST_F(RunDir, FullPipelineWritesEveryArtifact) {
  const auto config = write_config("c.json", kTinyConfig);
  const auto out = root_ / "run";
  run_command("train", out, with_config(config));
  EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
  EXPECT_TRUE(fs::exists(out / "config.json"));

  CommandOptions rest;  // config now comes from the run directory
  run_command("curves", out, rest);
  EXPECT_EQ(lines(out / "curves.csv"), 1u + 5u);

  const auto influence = run_command("influence", out, rest);
  EXPECT_EQ(influence.outputs, (std::vector<std::string>{"influence/test_0.csv", "influence/test_3.csv"}));
  EXPECT_EQ(lines(out / "influence/test_0.csv"), 61u);

  CommandOptions baseline;
  baseline.estimator = Estimator::FullnetBaseline;
  EXPECT_EQ(run_command("influence", out, baseline).outputs.front(), "influence/test_0_fullnet.csv");

  run_command("self-influence", out, rest);
  EXPECT_EQ(lines(out / "influence/self.csv"), 61u);
  EXPECT_TRUE(fs::exists(out / "influence/self_histogram.csv"));

  run_command("interpret", out, rest);
  EXPECT_TRUE(fs::exists(out / "influence/interpret_val.csv"));

  run_command("loo-validate", out, rest);
  EXPECT_EQ(lines(out / "oracle/spearman.csv"), 1u + 4u);
  EXPECT_EQ(lines(out / "oracle/summary.csv"), 2u);
  EXPECT_EQ(lines(out / "oracle/s5_t1.csv"), 61u);
  EXPECT_EQ(lines(out / "influence/loo_s6_t0.csv"), 61u);

  run_command("cleanse", out, rest);
  EXPECT_EQ(lines(out / "cleansing/report.csv"), 1u + 3u * 4u);
  EXPECT_EQ(lines(out / "cleansing/removed.csv"), 1u + 2u * 2u * 6u);
  EXPECT_EQ(lines(out / "cleansing/stability.csv"), 1u + 2u * 2u);
  EXPECT_TRUE(fs::exists(out / "cleansing/precision.csv"));

  run_command("report", out, rest);
  const auto report = Json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(report.contains("cleansing"));
  EXPECT_TRUE(report.contains("loo"));
  EXPECT_TRUE(report.contains("self_influence"));
  EXPECT_TRUE(report.contains("curves"));

  const auto manifest = Json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest.at("runs").size(), 9u);
  EXPECT_EQ(manifest.at("config_hash"), config_hash(load_config(config)));
  for (const auto& r : manifest.at("runs")) {
    EXPECT_TRUE(r.contains("wall_seconds"));
    for (const auto& [rel, hash] : r.at("outputs").items()) {
      (void)hash;
      EXPECT_TRUE(fs::exists(out / rel)) << rel;
    }
  }
  EXPECT_TRUE(manifest.at("versions").contains("compiler"));

  const auto replayed = replay(out, root_ / "again", 2);
  EXPECT_EQ(replayed.commands, 9u);
  EXPECT_GT(replayed.compared, 20u);
  EXPECT_TRUE(replayed.mismatches.empty());
  EXPECT_THROW(replay(out, root_ / "again", 1), PreconditionError);
}

TEST_F(RunDir, InterpretWithoutErrorsIsHeaderOnly) {
  const auto config = write_config("easy.json", kEasyConfig);
  const auto out = root_ / "run";
  run_command("train", out, with_config(config));
  run_command("interpret", out, {});
  EXPECT_EQ(slurp(out / "influence/interpret_val.csv"),
            "target_id,train_id,flipped_loss,masked_loss,estimate\n");
}

TEST_F(RunDir, DifferentConfigIsRefusedUnlessForced) {
  const auto a = write_config("a.json", kTinyConfig);
  const auto out = root_ / "run";
  run_command("train", out, with_config(a));
  CommandOptions other = with_config(a);
  other.seed = 99;
  EXPECT_THROW(run_command("influence", out, other), PreconditionError);
  EXPECT_THROW(run_command("train", out, other), PreconditionError);
  other.force = true;
  run_command("train", out, other);
  const auto manifest = Json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest.at("runs").size(), 1u);
  EXPECT_EQ(load_config(out / "config.json").seed, 99u);
}

TEST_F(RunDir, LooGateRequiresForce) {
  std::string big = kTinyConfig;
  big.replace(big.find("\"n_train\": 60"), 13, "\"n_train\": 2100");
  const auto config = write_config("big.json", big);
  const auto out = root_ / "run";
  CommandOptions o = with_config(config);
  run_command("train", out, o);
  EXPECT_THROW(run_command("loo-validate", out, {}), PreconditionError);
}

TEST_F(RunDir, BadTargetAndUnknownCommand) {
  std::string bad = kTinyConfig;
  bad.replace(bad.find("[0, 3]"), 6, "[0, 400]");
  const auto config = write_config("bad.json", bad);
  const auto out = root_ / "run";
  run_command("train", out, with_config(config));
  EXPECT_THROW(run_command("influence", out, {}), DataError);
  EXPECT_THROW(run_command("fly", out, {}), ConfigError);
  CommandOptions zero;
  zero.jobs = 0;
  EXPECT_THROW(run_command("train", out, zero), ConfigError);
}

TEST_F(RunDir, CsvSourceResolvesRelativeToConfig) {
  fs::create_directories(root_ / "data");
  {
    std::ofstream csv(root_ / "data" / "points.csv");
    csv << "x0,x1,label\n";
    for (int i = 0; i < 60; ++i) csv << (i % 2 ? 1.0 : -1.0) + 0.01 * i << ',' << 0.5 << ',' << i % 2 << '\n';
  }
  const auto config = write_config("csv.json", R"({
    "data": {"csv": {"path": "data/points.csv", "n_val": 10, "n_test": 10, "split_seed": 4}},
    "model": {"layer_widths": [2, 4, 2]},
    "train": {"epochs": 2}
  })");
  const auto loaded = load_config(config);
  const auto& csv = std::get<CsvSource>(loaded.data);
  EXPECT_TRUE(csv.path.is_absolute());
  const auto splits = load_splits(loaded);
  EXPECT_EQ(splits.train.size(), 40u);
  run_command("train", root_ / "run", with_config(config));
  EXPECT_TRUE(fs::exists(root_ / "run" / "checkpoint.json"));
}

TEST(Config, JsonRoundTripAndHash) {
  const auto config = config_from_json(Json::parse(kTinyConfig));
  EXPECT_EQ(config_from_json(config_to_json(config)), config);
  auto other = config;
  other.seed = 6;
  EXPECT_NE(config_hash(config), config_hash(other));
  EXPECT_EQ(config_hash(config), config_hash(config_from_json(config_to_json(config))));
}

TEST(Config, SeedsFeedEveryStream) {
  const auto config = config_from_json(Json::parse(kTinyConfig));
  const auto t = config.turnover_train(7);
  EXPECT_EQ(t.init_seed, 7u);
  EXPECT_EQ(t.shuffle_seed, 7u);
  EXPECT_EQ(t.turnover->global_seed, 7u);
  EXPECT_FALSE(config.plain_train(7).turnover.has_value());
  EXPECT_EQ(config.seeds(3), (std::vector<std::uint64_t>{5, 6, 7}));
}

TEST(Config, InvalidConfigsAreUsageErrors) {
  auto parse = [](const std::string& text) { return config_from_json(Json::parse(text)); };
  EXPECT_THROW(parse(R"({"colour": 1})"), ConfigError);
  EXPECT_THROW(parse(R"({"train": {"learning_rate": -1}})").validate(), ConfigError);
  EXPECT_THROW(parse(R"({"data": {"synthetic": {}, "csv": {"path": "x"}}})"), ConfigError);
  EXPECT_THROW(parse(R"({"influence": {"split": "train"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"cleansing": {"n_seeds": 1}})").validate(), ConfigError);
  EXPECT_THROW(parse(R"({"model": {"layer_widths": [2]}})").validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}
