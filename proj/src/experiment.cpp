#include "turnover/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "turnover/cleansing.hpp"
#include "turnover/csv.hpp"
#include "turnover/error.hpp"
#include "turnover/loss.hpp"
#include "turnover/stats.hpp"

namespace fs = std::filesystem;

namespace turnover {

namespace {

const char* split_name(TargetSplit split) { return split == TargetSplit::Val ? "val" : "test"; }

TargetSplit split_from(const std::string& name) {
  if (name == "val") return TargetSplit::Val;
  if (name == "test") return TargetSplit::Test;
  throw ConfigError("unknown split '" + name + "' (expected val or test)");
}

const char* estimator_name(Estimator e) {
  return e == Estimator::Standard ? "standard" : "fullnet-baseline";
}

Estimator estimator_from(const std::string& name) {
  if (name == "standard") return Estimator::Standard;
  if (name == "fullnet-baseline") return Estimator::FullnetBaseline;
  throw ConfigError("unknown estimator '" + name + "' (expected standard or fullnet-baseline)");
}

template <typename T>
T value_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->template get<T>();
}

std::string versions_string() {
  return std::string("turnover ") + TURNOVER_VERSION;
}

Json versions_json() {
  return {{"turnover", TURNOVER_VERSION},
          {"compiler", __VERSION__},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- config

TrainConfig ExperimentConfig::turnover_train(std::uint64_t s) const {
  TrainConfig t = plain_train(s);
  t.turnover = model.mask_plan(s, mask_scheme);
  return t;
}

TrainConfig ExperimentConfig::plain_train(std::uint64_t s) const {
  TrainConfig t = train;
  t.init_seed = s;
  t.shuffle_seed = s;
  t.turnover.reset();
  return t;
}

std::vector<std::uint64_t> ExperimentConfig::seeds(std::size_t count) const {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = seed + i;
  return out;
}

void ExperimentConfig::validate() const {
  model.validate();
  turnover_train(seed).validate();
  if (const auto* spec = std::get_if<SyntheticSpec>(&data)) spec->validate();
  if (const auto* csv = std::get_if<CsvSource>(&data); csv && csv->path.empty()) {
    throw ConfigError("data.csv.path is empty");
  }
  if (influence.batch_size < 1) throw ConfigError("influence.batch_size must be at least 1");
  if (interpret.top_k < 1) throw ConfigError("interpret.top_k must be at least 1");
  if (loo.n_targets < 1 || loo.n_seeds < 1) throw ConfigError("loo needs at least one target and one seed");
  if (!(cleansing.fraction > 0.0 && cleansing.fraction < 1.0)) {
    throw ConfigError("cleansing.fraction must lie in (0, 1)");
  }
  if (cleansing.n_seeds < 2) throw ConfigError("cleansing.n_seeds must be at least 2");
}

Json config_to_json(const ExperimentConfig& c) {
  Json data;
  if (const auto* spec = std::get_if<SyntheticSpec>(&c.data)) {
    data = {{"synthetic", *spec}};
  } else {
    const auto& csv = std::get<CsvSource>(c.data);
    data = {{"csv",
             {{"path", csv.path.string()},
              {"header", csv.header},
              {"n_classes", csv.n_classes},
              {"n_val", csv.n_val},
              {"n_test", csv.n_test},
              {"split_seed", csv.split_seed}}}};
  }
  Json train = {{"learning_rate", c.train.learning_rate},
                {"momentum", c.train.momentum},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"decay", nullptr}};
  if (c.train.decay) train["decay"] = *c.train.decay;
  return {{"data", data},
          {"model", c.model},
          {"train", train},
          {"mask_scheme", scheme_to_json(c.mask_scheme)},
          {"seed", c.seed},
          {"influence",
           {{"targets", c.influence.targets},
            {"split", split_name(c.influence.split)},
            {"batch_size", c.influence.batch_size}}},
          {"interpret", {{"split", split_name(c.interpret.split)}, {"top_k", c.interpret.top_k}}},
          {"loo", {{"n_targets", c.loo.n_targets}, {"n_seeds", c.loo.n_seeds}}},
          {"cleansing",
           {{"fraction", c.cleansing.fraction},
            {"n_seeds", c.cleansing.n_seeds},
            {"val_sizes", c.cleansing.val_sizes}}}};
}

ExperimentConfig config_from_json(const Json& j) {
  try {
    require_keys(j, {"data", "model", "train", "mask_scheme", "seed", "influence", "interpret", "loo",
                     "cleansing"},
                 "config");
    ExperimentConfig c;
    if (j.contains("data")) {
      const auto& d = j.at("data");
      require_keys(d, {"synthetic", "csv"}, "data");
      if (d.size() != 1) throw ConfigError("data: give exactly one of synthetic or csv");
      if (d.contains("synthetic")) {
        c.data = d.at("synthetic").get<SyntheticSpec>();
      } else {
        const auto& s = d.at("csv");
        require_keys(s, {"path", "header", "n_classes", "n_val", "n_test", "split_seed"}, "data.csv");
        CsvSource csv;
        csv.path = s.at("path").get<std::string>();
        csv.header = value_or(s, "header", true);
        csv.n_classes = value_or<std::size_t>(s, "n_classes", 0);
        csv.n_val = value_or<std::size_t>(s, "n_val", 0);
        csv.n_test = value_or<std::size_t>(s, "n_test", 0);
        csv.split_seed = value_or<std::uint64_t>(s, "split_seed", 0);
        c.data = csv;
      }
    }
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("train")) {
      const auto& t = j.at("train");
      require_keys(t, {"learning_rate", "momentum", "batch_size", "epochs", "decay"}, "train");
      c.train = t.get<TrainConfig>();
    }
    if (j.contains("mask_scheme")) c.mask_scheme = scheme_from_json(j.at("mask_scheme"));
    c.seed = value_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("influence")) {
      const auto& s = j.at("influence");
      require_keys(s, {"targets", "split", "batch_size"}, "influence");
      c.influence.targets = value_or(s, "targets", c.influence.targets);
      c.influence.split = split_from(value_or<std::string>(s, "split", "test"));
      c.influence.batch_size = value_or(s, "batch_size", c.influence.batch_size);
    }
    if (j.contains("interpret")) {
      const auto& s = j.at("interpret");
      require_keys(s, {"split", "top_k"}, "interpret");
      c.interpret.split = split_from(value_or<std::string>(s, "split", "val"));
      c.interpret.top_k = value_or(s, "top_k", c.interpret.top_k);
    }
    if (j.contains("loo")) {
      const auto& s = j.at("loo");
      require_keys(s, {"n_targets", "n_seeds"}, "loo");
      c.loo.n_targets = value_or(s, "n_targets", c.loo.n_targets);
      c.loo.n_seeds = value_or(s, "n_seeds", c.loo.n_seeds);
    }
    if (j.contains("cleansing")) {
      const auto& s = j.at("cleansing");
      require_keys(s, {"fraction", "n_seeds", "val_sizes"}, "cleansing");
      c.cleansing.fraction = value_or(s, "fraction", c.cleansing.fraction);
      c.cleansing.n_seeds = value_or(s, "n_seeds", c.cleansing.n_seeds);
      c.cleansing.val_sizes = value_or(s, "val_sizes", c.cleansing.val_sizes);
    }
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto c = config_from_json(j);
  if (auto* csv = std::get_if<CsvSource>(&c.data); csv && csv->path.is_relative()) {
    csv->path = fs::absolute(path.parent_path() / csv->path).lexically_normal();
  }
  return c;
}

std::string config_hash(const ExperimentConfig& config) {
  return fnv1a_hex(config_to_json(config).dump());
}

Splits load_splits(const ExperimentConfig& config) {
  if (const auto* spec = std::get_if<SyntheticSpec>(&config.data)) return generate_synthetic(*spec);
  const auto& csv = std::get<CsvSource>(config.data);
  if (!fs::exists(csv.path)) throw DataError("dataset " + csv.path.string() + " does not exist");
  const auto all = load_csv(csv.path, CsvSchema{csv.header, csv.n_classes});
  return split_dataset(all, csv.n_val, csv.n_test, csv.split_seed);
}

// ---------------------------------------------------------------- run directory

namespace {

struct Run {
  fs::path out;
  ExperimentConfig config;
  std::string hash;
  CommandOptions options;
  CommandResult result;
  std::vector<std::uint64_t> seeds;

  void emit(const std::string& rel, const std::function<void(std::ostream&)>& write) {
    std::ostringstream ss;
    write(ss);
    write_text(out / rel, ss.str());
    result.outputs.push_back(rel);
  }
  void say(std::string line) { result.summary.push_back(std::move(line)); }

  const Dataset& split(const Splits& s, TargetSplit which) const {
    return which == TargetSplit::Val ? s.val : s.test;
  }

  TrainedModel checkpoint() const {
    auto c = load_checkpoint(out / "checkpoint.json");
    if (c.config_hash != hash) {
      throw PreconditionError("checkpoint in " + out.string() +
                              " was trained with a different config; rerun `turnover train`");
    }
    return std::move(c.model);
  }

  EstimateOptions estimate_options() const {
    EstimateOptions e;
    e.estimator = options.estimator;
    e.batch_size = config.influence.batch_size;
    e.jobs = options.jobs;
    return e;
  }
};

void cmd_train(Run& run) {
  const auto splits = load_splits(run.config);
  const auto config = run.config.turnover_train(run.config.seed);
  if (config.turnover->hash_composed()) {
    if (!config.turnover->has_capacity_for(splits.train.size())) {
      run.say("warning: K^k is smaller than the training set; instances will share masks");
    }
    run.say(std::to_string(count_code_collisions(*config.turnover, splits.train.size())) +
            " instance(s) share a code tuple with a lower id");
  }
  const auto result = train(splits.train, config, run.config.model);
  save_checkpoint({result.model, run.hash}, run.out / "checkpoint.json");
  run.result.outputs.push_back("checkpoint.json");
  run.seeds = {run.config.seed};
  const auto val = evaluate(result.model.params, result.model.config, splits.val);
  const auto test = evaluate(result.model.params, result.model.config, splits.test);
  run.say("trained on " + std::to_string(splits.train.size()) + " instances");
  if (!splits.val.empty()) run.say("val accuracy " + fixed(val.accuracy));
  if (!splits.test.empty()) run.say("test accuracy " + fixed(test.accuracy));
}

void cmd_curves(Run& run) {
  const auto splits = load_splits(run.config);
  if (splits.test.empty()) throw DataError("curves need a non-empty test split");
  TrainOptions opts;
  opts.monitor = &splits.test;
  const auto result =
      train(splits.train, run.config.turnover_train(run.config.seed), run.config.model, opts);
  run.emit("curves.csv", [&](std::ostream& o) { write_curves_csv(result.log.records, o); });
  run.seeds = {run.config.seed};
  const auto& last = result.log.records.back();
  run.say("final masked " + fixed(last.masked_train_loss) + " flipped " +
          fixed(last.flipped_train_loss) + " test " + fixed(last.test_loss));
  if (result.log.diverged) run.say("warning: training diverged");
  if (fs::exists(run.out / "checkpoint.json")) {
    const auto saved = load_checkpoint(run.out / "checkpoint.json");
    if (saved.config_hash == run.hash && !(saved.model == result.model)) {
      throw PreconditionError("retrained model differs from checkpoint.json");
    }
  }
}

void cmd_influence(Run& run) {
  const auto model = run.checkpoint();
  const auto splits = load_splits(run.config);
  const InfluenceEstimator estimator(model, run.estimate_options());
  const TargetSplit which = run.options.split.value_or(run.config.influence.split);
  const Dataset& targets = run.split(splits, which);
  const auto ids = splits.train.ids();
  const std::string suffix = run.options.estimator == Estimator::Standard ? "" : "_fullnet";
  for (auto t : run.config.influence.targets) {
    if (t >= targets.size()) {
      throw DataError("target id " + std::to_string(t) + " is outside the " + split_name(which) +
                      " split of " + std::to_string(targets.size()));
    }
    const auto records = estimator.estimate(targets[t], ids);
    const std::string rel = "influence/" + std::string(split_name(which)) + "_" + std::to_string(t) +
                            suffix + ".csv";
    run.emit(rel, [&](std::ostream& o) { write_influence_csv(records, o); });
  }
  run.seeds = {model.params.init_seed};
  run.say(std::to_string(run.config.influence.targets.size()) + " target(s) x " +
          std::to_string(ids.size()) + " training instances, " + estimator_name(run.options.estimator));
}

void cmd_self_influence(Run& run) {
  const auto model = run.checkpoint();
  const auto splits = load_splits(run.config);
  const auto self = self_influence(model, splits.train, run.estimate_options());
  run.emit("influence/self.csv", [&](std::ostream& o) { write_influence_csv(self.records, o); });
  run.emit("influence/self_histogram.csv", [&](std::ostream& o) { write_histogram_csv(self.histogram, o); });
  const auto positive = std::count_if(self.records.begin(), self.records.end(),
                                      [](const InfluenceRecord& r) { return r.estimate > 0.0; });
  run.seeds = {model.params.init_seed};
  run.say("positive self-influence: " + std::to_string(positive) + " of " +
          std::to_string(self.records.size()));
}

void cmd_interpret(Run& run) {
  const auto model = run.checkpoint();
  const auto splits = load_splits(run.config);
  const InfluenceEstimator estimator(model, run.estimate_options());
  const TargetSplit which = run.options.split.value_or(run.config.interpret.split);
  const std::size_t k = run.options.top_k.value_or(run.config.interpret.top_k);
  const Dataset& targets = run.split(splits, which);
  const auto ids = splits.train.ids();

  std::vector<InfluenceRecord> report;
  std::size_t errors = 0;
  for (const auto& inst : targets.instances()) {
    const auto predicted = argmax(logits(model.params, model.config, inst.features));
    if (predicted == inst.label) continue;
    ++errors;
    // Influence on the wrong prediction: the target carries the predicted label.
    const auto wrong = targets.relabeled(inst.id, predicted);
    const auto records = estimator.estimate(wrong, ids);
    const auto ranked = rank_influences(records, k, RankOrder::MostPositive);
    report.insert(report.end(), ranked.top.begin(), ranked.top.end());
  }
  const std::string rel = "influence/interpret_" + std::string(split_name(which)) + ".csv";
  run.emit(rel, [&](std::ostream& o) { write_influence_csv(report, o); });
  run.seeds = {model.params.init_seed};
  run.say(std::to_string(errors) + " misclassified " + split_name(which) + " instance(s)" +
          (errors == 0 ? ", empty report" : ", top " + std::to_string(k) + " each"));
}

void cmd_loo_validate(Run& run) {
  const auto splits = load_splits(run.config);
  OracleOptions oracle_opts;
  oracle_opts.force = run.options.force;
  oracle_opts.jobs = run.options.jobs;
  if (splits.train.size() > oracle_opts.max_train && !oracle_opts.force) {
    throw PreconditionError("leave-one-out needs one retrain per instance; " +
                            std::to_string(splits.train.size()) + " > " +
                            std::to_string(oracle_opts.max_train) + " instances (pass --force)");
  }
  if (splits.test.size() < run.config.loo.n_targets) {
    throw DataError("loo needs " + std::to_string(run.config.loo.n_targets) + " test targets, have " +
                    std::to_string(splits.test.size()));
  }
  const auto ids = splits.train.ids();
  struct Row {
    std::uint64_t seed, target;
    double rho;
  };
  std::vector<Row> rows;
  run.seeds = run.config.seeds(run.config.loo.n_seeds);
  for (auto s : run.seeds) {
    const auto model = train(splits.train, run.config.turnover_train(s), run.config.model).model;
    const InfluenceEstimator estimator(model, run.estimate_options());
    LooOracle oracle(splits.train, run.config.plain_train(s), run.config.model, oracle_opts);
    oracle.prepare(ids);
    for (std::uint64_t t = 0; t < run.config.loo.n_targets; ++t) {
      const auto est = estimator.estimate(splits.test[t], ids);
      const auto orc = oracle.records(splits.test[t], ids);
      const std::string tag = "s" + std::to_string(s) + "_t" + std::to_string(t) + ".csv";
      run.emit("influence/loo_" + tag, [&](std::ostream& o) { write_influence_csv(est, o); });
      run.emit("oracle/" + tag, [&](std::ostream& o) { write_oracle_csv(orc, o); });
      std::vector<double> a, b;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        a.push_back(est[i].estimate);
        b.push_back(orc[i].true_influence);
      }
      rows.push_back({s, t, spearman(a, b)});
    }
  }
  std::vector<double> rhos;
  std::size_t positive = 0;
  for (const auto& r : rows) {
    rhos.push_back(r.rho);
    positive += r.rho > 0.0;
  }
  const double p = sign_test_p(positive, rows.size());
  run.emit("oracle/spearman.csv", [&](std::ostream& o) {
    o << "seed,target_id,spearman\n";
    for (const auto& r : rows) o << r.seed << ',' << r.target << ',' << csv::real(r.rho) << '\n';
  });
  run.emit("oracle/summary.csv", [&](std::ostream& o) {
    o << "pairs,positive,mean_spearman,sign_test_p\n";
    o << rows.size() << ',' << positive << ',' << csv::real(mean(rhos)) << ',' << csv::real(p) << '\n';
  });
  run.say("spearman > 0 in " + std::to_string(positive) + "/" + std::to_string(rows.size()) +
          " pairs, mean " + fixed(mean(rhos)) + ", sign test p " + fixed(p, 6));
}

void cmd_cleanse(Run& run) {
  const auto splits = load_splits(run.config);
  const double fraction = run.options.fraction.value_or(run.config.cleansing.fraction);
  CleansingConfig cc;
  cc.model = run.config.model;
  cc.train = run.config.turnover_train(run.config.seed);
  cc.estimate = run.estimate_options();
  cc.jobs = run.options.jobs;
  run.seeds = run.config.seeds(run.config.cleansing.n_seeds);
  const auto exp = run_cleansing_experiment(splits.train, splits.val, splits.test, fraction, run.seeds, cc);
  run.emit("cleansing/report.csv", [&](std::ostream& o) { write_cleansing_csv(exp, o); });

  const auto& flipped = splits.train.flipped_ids();
  run.emit("cleansing/removed.csv", [&](std::ostream& o) {
    o << "variant,seed,train_id,flipped\n";
    for (const auto* report : {&exp.cleanse, &exp.random_removal}) {
      for (const auto& r : report->runs) {
        for (auto id : r.removed_ids) {
          o << variant_name(report->variant) << ',' << r.seed << ',' << id << ','
            << (std::binary_search(flipped.begin(), flipped.end(), id) ? 1 : 0) << '\n';
        }
      }
    }
  });
  run.emit("cleansing/precision.csv", [&](std::ostream& o) {
    o << "seed,removed,precision\n";
    for (const auto& r : exp.cleanse.runs) {
      o << r.seed << ',' << r.removed_ids.size() << ',' << csv::real(removal_precision(r.removed_ids, flipped))
        << '\n';
    }
    o << "pooled," << removal_count(splits.train.size(), fraction) * exp.cleanse.runs.size() << ','
      << csv::real(exp.pooled_precision) << '\n';
  });
  run.emit("cleansing/stability.csv", [&](std::ostream& o) {
    o << "seed,val_size,spearman_vs_full,removed_overlap\n";
    for (std::size_t s = 0; s < exp.scorers.size(); ++s) {
      const auto rows = ranking_stability(exp.scorers[s], splits.train, splits.val,
                                          run.config.cleansing.val_sizes, fraction, cc.estimate);
      for (const auto& r : rows) {
        o << run.seeds[s] << ',' << r.val_size << ',' << csv::real(r.spearman_vs_full) << ','
          << csv::real(r.removed_overlap) << '\n';
      }
    }
  });
  run.say("test loss: cleanse " + fixed(exp.cleanse.mean_loss) + ", random " +
          fixed(exp.random_removal.mean_loss) + ", none " + fixed(exp.no_cleansing.mean_loss));
  if (!flipped.empty()) run.say("removed-set precision " + fixed(exp.pooled_precision, 3));
}

// Rows of a small CSV as string fields, header dropped.
std::vector<std::vector<std::string>> read_rows(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

void cmd_report(Run& run) {
  Json report = {{"config_hash", run.hash}};
  if (fs::exists(run.out / "curves.csv")) {
    const auto rows = read_rows(run.out / "curves.csv");
    if (!rows.empty()) {
      const auto& r = rows.back();
      report["curves"] = {{"epoch", std::stoull(r[0])},
                          {"masked_train_loss", std::stod(r[1])},
                          {"flipped_train_loss", std::stod(r[2])},
                          {"full_train_loss", std::stod(r[3])},
                          {"test_loss", std::stod(r[4])},
                          {"test_accuracy", std::stod(r[5])}};
    }
  }
  if (fs::exists(run.out / "influence/self.csv")) {
    const auto rows = read_rows(run.out / "influence/self.csv");
    std::size_t positive = 0;
    for (const auto& r : rows) positive += std::stod(r[4]) > 0.0;
    report["self_influence"] = {{"instances", rows.size()}, {"positive", positive}};
  }
  if (fs::exists(run.out / "oracle/summary.csv")) {
    const auto r = read_rows(run.out / "oracle/summary.csv").at(0);
    report["loo"] = {{"pairs", std::stoull(r[0])},
                     {"positive", std::stoull(r[1])},
                     {"mean_spearman", std::stod(r[2])},
                     {"sign_test_p", std::stod(r[3])}};
  }
  if (fs::exists(run.out / "cleansing/report.csv")) {
    Json variants = Json::object();
    for (const auto& r : read_rows(run.out / "cleansing/report.csv")) {
      if (r[1] == "mean") variants[r[0]] = {{"mean_test_accuracy", std::stod(r[2])}, {"mean_test_loss", std::stod(r[3])}};
    }
    report["cleansing"] = variants;
  }
  if (fs::exists(run.out / "cleansing/precision.csv")) {
    const auto rows = read_rows(run.out / "cleansing/precision.csv");
    if (!rows.empty()) report["cleansing_precision"] = std::stod(rows.back()[2]);
  }
  write_text(run.out / "report.json", report.dump(2) + "\n");
  run.result.outputs.push_back("report.json");
  std::istringstream lines(report.dump(2));
  for (std::string line; std::getline(lines, line);) run.say(line);
}

const std::map<std::string, std::function<void(Run&)>>& commands() {
  static const std::map<std::string, std::function<void(Run&)>> table = {
      {"train", cmd_train},
      {"curves", cmd_curves},
      {"influence", cmd_influence},
      {"self-influence", cmd_self_influence},
      {"interpret", cmd_interpret},
      {"loo-validate", cmd_loo_validate},
      {"cleanse", cmd_cleanse},
      {"report", cmd_report},
  };
  return table;
}

Json options_json(const CommandOptions& o) {
  Json j = {{"jobs", o.jobs}, {"force", o.force}, {"estimator", estimator_name(o.estimator)}};
  j["fraction"] = o.fraction ? Json(*o.fraction) : Json(nullptr);
  j["top_k"] = o.top_k ? Json(*o.top_k) : Json(nullptr);
  j["split"] = o.split ? Json(split_name(*o.split)) : Json(nullptr);
  return j;
}

CommandOptions options_from_json(const Json& j) {
  CommandOptions o;
  o.jobs = value_or(j, "jobs", 1u);
  o.force = value_or(j, "force", false);
  o.estimator = estimator_from(value_or<std::string>(j, "estimator", "standard"));
  if (j.contains("fraction") && !j["fraction"].is_null()) o.fraction = j["fraction"].get<double>();
  if (j.contains("top_k") && !j["top_k"].is_null()) o.top_k = j["top_k"].get<std::size_t>();
  if (j.contains("split") && !j["split"].is_null()) o.split = split_from(j["split"].get<std::string>());
  return o;
}

Json read_manifest(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"train",     "curves",       "influence", "self-influence",
                                                 "interpret", "loo-validate", "cleanse",   "report"};
  return names;
}

CommandResult run_command(const std::string& name, const fs::path& out, const CommandOptions& options) {
  const auto it = commands().find(name);
  if (it == commands().end()) throw ConfigError("unknown command '" + name + "'");
  if (options.jobs < 1) throw ConfigError("--jobs must be at least 1");
  if (options.top_k && *options.top_k < 1) throw ConfigError("--top-k must be at least 1");

  const fs::path stored = out / "config.json";
  ExperimentConfig config;
  if (options.config_path) {
    config = load_config(*options.config_path);
  } else if (fs::exists(stored)) {
    config = load_config(stored);
  } else {
    throw PreconditionError("no config: pass --config or use a run directory that has config.json");
  }
  if (options.seed) config.seed = *options.seed;
  config.validate();

  Run run{out, config, config_hash(config), options, {}, {}};
  fs::create_directories(out);

  const fs::path manifest_path = out / "manifest.json";
  Json manifest;
  bool fresh = true;
  if (fs::exists(stored)) {
    const auto existing = config_hash(load_config(stored));
    if (existing != run.hash) {
      if (!(name == "train" && options.force)) {
        throw PreconditionError("run directory " + out.string() +
                                " holds a different config; use a new --out (or train --force to replace it)");
      }
    } else if (fs::exists(manifest_path)) {
      manifest = read_manifest(manifest_path);
      fresh = false;
    }
  }
  if (fresh) {
    manifest = {{"config_hash", run.hash}, {"versions", versions_json()}, {"runs", Json::array()}};
  }
  write_text(stored, config_to_json(config).dump(2) + "\n");

  const auto start = std::chrono::steady_clock::now();
  it->second(run);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json outputs = Json::object();
  for (const auto& rel : run.result.outputs) outputs[rel] = file_hash(out / rel);
  manifest["runs"].push_back({{"command", name},
                              {"options", options_json(options)},
                              {"seed", config.seed},
                              {"seeds", run.seeds},
                              {"wall_seconds", seconds},
                              {"outputs", outputs}});
  write_text(manifest_path, manifest.dump(2) + "\n");
  run.result.summary.push_back(name + " done in " + fixed(seconds, 2) + " s (" + versions_string() + ")");
  return run.result;
}

ReplayResult replay(const fs::path& from, const fs::path& to, unsigned jobs) {
  const auto manifest_path = from / "manifest.json";
  if (!fs::exists(manifest_path)) throw PreconditionError("no manifest.json in " + from.string());
  if (fs::exists(to / "manifest.json")) {
    throw PreconditionError("replay target " + to.string() + " already holds a run; pick an empty directory");
  }
  const auto manifest = read_manifest(manifest_path);
  const auto config = load_config(from / "config.json");
  if (config_hash(config) != manifest.value("config_hash", "")) {
    throw DataError("config.json in " + from.string() + " does not match its manifest");
  }
  fs::create_directories(to);
  write_text(to / "config.json", config_to_json(config).dump(2) + "\n");

  ReplayResult result;
  std::map<std::string, std::string> expected;
  for (const auto& r : manifest.at("runs")) {
    auto opts = options_from_json(r.at("options"));
    opts.jobs = jobs;
    run_command(r.at("command").get<std::string>(), to, opts);
    ++result.commands;
    for (const auto& [rel, hash] : r.at("outputs").items()) expected[rel] = hash.get<std::string>();
  }
  for (const auto& [rel, hash] : expected) {
    ++result.compared;
    if (!fs::exists(to / rel) || file_hash(to / rel) != hash) result.mismatches.push_back(rel);
  }
  return result;
}

}  // namespace turnover
