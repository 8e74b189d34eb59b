#include "turnover/influence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "turnover/csv.hpp"
#include "turnover/error.hpp"
#include "turnover/loss.hpp"
#include "turnover/parallel.hpp"

namespace turnover {

namespace {

const MaskPlan& require_plan(const TrainedModel& model) {
  if (!model.plan) {
    throw PreconditionError(
        "influence estimation needs a model trained with turn-over dropout; this model has no mask plan");
  }
  return *model.plan;
}

std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

}  // namespace

InfluenceEstimator::InfluenceEstimator(const TrainedModel& model, EstimateOptions options)
    : model_(model), options_(options), generator_(require_plan(model)) {
  model_.config.check_plan(generator_.plan());
  if (options_.batch_size == 0) throw ConfigError("estimate batch size must be at least 1");
}

void InfluenceEstimator::estimate_chunk(const Instance& target, std::span<const std::uint64_t> ids,
                                        std::span<InfluenceRecord> out) const {
  const bool fullnet = options_.estimator == Estimator::FullnetBaseline;
  // Rows [0, n) use the flipped masks, rows [n, 2n) the masks themselves.
  const std::size_t n = ids.size();
  Matrix inputs(2 * n, target.features.size());
  for (std::size_t r = 0; r < 2 * n; ++r) {
    std::copy(target.features.begin(), target.features.end(), inputs.row(r).begin());
  }
  std::vector<Mask> masks;
  masks.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) masks.push_back(generator_.flipped(ids[i]));
  if (!fullnet) {
    for (std::size_t i = 0; i < n; ++i) masks.push_back(generator_.mask(ids[i]));
  }
  std::vector<const Mask*> mask_ptrs(2 * n, nullptr);
  for (std::size_t r = 0; r < masks.size(); ++r) mask_ptrs[r] = &masks[r];

  const Matrix out_logits = forward_batch(model_.params, model_.config, inputs, mask_ptrs);
  for (std::size_t i = 0; i < n; ++i) {
    auto& rec = out[i];
    rec.target_id = target.id;
    rec.train_id = ids[i];
    rec.flipped_loss = cross_entropy(out_logits.row(i), target.label);
    rec.masked_loss = cross_entropy(out_logits.row(n + i), target.label);
    rec.estimate = rec.flipped_loss - rec.masked_loss;
  }
}

std::vector<InfluenceRecord> InfluenceEstimator::estimate(
    const Instance& target, std::span<const std::uint64_t> train_ids) const {
  if (target.features.size() != model_.config.input_dim()) {
    throw ShapeError("target has " + std::to_string(target.features.size()) +
                     " features, model expects " + std::to_string(model_.config.input_dim()));
  }
  std::vector<InfluenceRecord> records(train_ids.size());
  const std::size_t chunk = options_.batch_size;
  parallel_for(chunk_count(train_ids.size(), chunk), options_.jobs, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t len = std::min(chunk, train_ids.size() - begin);
    estimate_chunk(target, train_ids.subspan(begin, len),
                   std::span<InfluenceRecord>(records).subspan(begin, len));
  });
  return records;
}

std::vector<double> InfluenceEstimator::mean_on_set(const Dataset& val_set,
                                                    std::span<const std::uint64_t> train_ids) const {
  if (val_set.empty()) throw DataError("mean influence needs a non-empty validation set");
  std::vector<double> means(train_ids.size(), 0.0);
  const std::size_t chunk = options_.batch_size;
  parallel_for(chunk_count(train_ids.size(), chunk), options_.jobs, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t len = std::min(chunk, train_ids.size() - begin);
    const auto ids = train_ids.subspan(begin, len);
    std::vector<InfluenceRecord> row(len);
    // Sum over targets in validation order; every train id sees the same order.
    for (const auto& target : val_set.instances()) {
      estimate_chunk(target, ids, row);
      for (std::size_t i = 0; i < len; ++i) means[begin + i] += row[i].estimate;
    }
  });
  const double n = static_cast<double>(val_set.size());
  for (double& m : means) m /= n;
  return means;
}

std::vector<InfluenceRecord> estimate_influence(const TrainedModel& model, const Instance& target,
                                                std::span<const std::uint64_t> train_ids,
                                                const EstimateOptions& options) {
  return InfluenceEstimator(model, options).estimate(target, train_ids);
}

Histogram make_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  if (values.empty()) {
    h.edges.assign(bins + 1, 0.0);
    return h;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  double hi = *hi_it;
  if (hi == lo) hi = lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

SelfInfluence self_influence(const TrainedModel& model, const Dataset& train_set,
                             const EstimateOptions& options, std::size_t bins) {
  InfluenceEstimator estimator(model, options);
  SelfInfluence result;
  result.records.resize(train_set.size());
  parallel_for(train_set.size(), options.jobs, [&](std::size_t i) {
    const std::uint64_t id = train_set[i].id;
    result.records[i] = estimator.estimate(train_set[i], std::span<const std::uint64_t>(&id, 1))[0];
  });
  std::vector<double> values(result.records.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = result.records[i].estimate;
  result.histogram = make_histogram(values, bins);
  return result;
}

std::vector<double> mean_influence_on_set(const TrainedModel& model, const Dataset& val_set,
                                          std::span<const std::uint64_t> train_ids,
                                          const EstimateOptions& options) {
  return InfluenceEstimator(model, options).mean_on_set(val_set, train_ids);
}

Ranking rank_influences(std::span<const InfluenceRecord> records, std::size_t k, RankOrder order) {
  if (records.empty()) throw DataError("cannot rank an empty record set");
  if (k == 0) throw ConfigError("top-k needs k >= 1");
  std::vector<InfluenceRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(), [order](const auto& a, const auto& b) {
    if (a.estimate != b.estimate) {
      return order == RankOrder::MostPositive ? a.estimate > b.estimate : a.estimate < b.estimate;
    }
    return a.train_id < b.train_id;
  });
  Ranking ranking;
  ranking.truncated = k > sorted.size();
  sorted.resize(std::min(k, sorted.size()));
  ranking.top = std::move(sorted);
  return ranking;
}

LooOracle::LooOracle(const Dataset& train_set, TrainConfig config, ModelConfig model_config,
                     OracleOptions options)
    : train_set_(train_set),
      config_(std::move(config)),
      model_config_(std::move(model_config)),
      options_(options) {
  if (config_.turnover) {
    throw PreconditionError("the leave-one-out oracle retrains plainly; drop the turn-over mask plan");
  }
  if (train_set_.size() > options_.max_train && !options_.force) {
    throw PreconditionError("leave-one-out oracle refuses " + std::to_string(train_set_.size()) +
                            " training instances (limit " + std::to_string(options_.max_train) +
                            "); it retrains once per instance. Pass --force to run anyway");
  }
  full_ = train(train_set_, config_, model_config_).model;
}

const TrainedModel& LooOracle::loo_model(std::uint64_t train_id) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = loo_.find(train_id); it != loo_.end()) return *it->second;
  }
  TrainOptions options;
  options.excluded_id = train_id;
  auto model = std::make_shared<const TrainedModel>(train(train_set_, config_, model_config_, options).model);
  std::lock_guard lock(mutex_);
  return *loo_.emplace(train_id, std::move(model)).first->second;
}

void LooOracle::prepare(std::span<const std::uint64_t> train_ids) {
  parallel_for(train_ids.size(), options_.jobs, [&](std::size_t i) { loo_model(train_ids[i]); });
}

OracleRecord LooOracle::record(const Instance& target, std::uint64_t train_id) {
  const TrainedModel& loo = loo_model(train_id);
  OracleRecord rec;
  rec.target_id = target.id;
  rec.train_id = train_id;
  rec.full_loss = loss_on(full_.params, full_.config, target.features, target.label);
  rec.loo_loss = loss_on(loo.params, loo.config, target.features, target.label);
  rec.true_influence = rec.loo_loss - rec.full_loss;
  return rec;
}

std::vector<OracleRecord> LooOracle::records(const Instance& target,
                                             std::span<const std::uint64_t> train_ids) {
  prepare(train_ids);
  std::vector<OracleRecord> out;
  out.reserve(train_ids.size());
  for (auto id : train_ids) out.push_back(record(target, id));
  return out;
}

std::size_t LooOracle::retrain_count() const {
  std::lock_guard lock(mutex_);
  return loo_.size();
}

OracleRecord true_influence_loo(const Dataset& train_set, const TrainConfig& config,
                                const ModelConfig& model_config, const Instance& target,
                                std::uint64_t train_id, const OracleOptions& options) {
  LooOracle oracle(train_set, config, model_config, options);
  return oracle.record(target, train_id);
}

void write_influence_csv(std::span<const InfluenceRecord> records, std::ostream& out) {
  out << "target_id,train_id,flipped_loss,masked_loss,estimate\n";
  for (const auto& r : records) {
    out << r.target_id << ',' << r.train_id << ',' << csv::real(r.flipped_loss) << ','
        << csv::real(r.masked_loss) << ',' << csv::real(r.estimate) << '\n';
  }
}

void write_oracle_csv(std::span<const OracleRecord> records, std::ostream& out) {
  out << "target_id,train_id,full_loss,loo_loss,true_influence\n";
  for (const auto& r : records) {
    out << r.target_id << ',' << r.train_id << ',' << csv::real(r.full_loss) << ','
        << csv::real(r.loo_loss) << ',' << csv::real(r.true_influence) << '\n';
  }
}

void write_histogram_csv(const Histogram& histogram, std::ostream& out) {
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < histogram.counts.size(); ++b) {
    out << csv::real(histogram.edges[b]) << ',' << csv::real(histogram.edges[b + 1]) << ','
        << histogram.counts[b] << '\n';
  }
}

}  // namespace turnover
