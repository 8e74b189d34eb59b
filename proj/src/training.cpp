#include "turnover/training.hpp"

#include <cmath>
#include <ostream>

#include "turnover/csv.hpp"
#include "turnover/error.hpp"
#include "turnover/loss.hpp"
#include "turnover/rng.hpp"

namespace turnover {

namespace {

struct Velocity {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

void sgd_step(ModelParams& params, Velocity& velocity, const Gradients& grads, double lr,
              double momentum) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    auto w = params.weights[l].values();
    auto v = velocity.weights[l].values();
    auto g = grads.weights[l].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      w[i] -= lr * v[i];
    }
    auto& b = params.biases[l];
    auto& vb = velocity.biases[l];
    for (std::size_t i = 0; i < b.size(); ++i) {
      vb[i] = momentum * vb[i] + grads.biases[l][i];
      b[i] -= lr * vb[i];
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (decay && (decay->every_epochs == 0 || !(decay->factor > 0.0))) {
    throw ConfigError("step decay needs every_epochs >= 1 and a positive factor");
  }
  if (turnover) turnover->validate();
}

Schedule make_schedule(std::size_t n, const TrainConfig& config) {
  if (n == 0) throw ConfigError("cannot schedule an empty dataset");
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  Schedule schedule(config.epochs);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    std::vector<std::uint64_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    CounterRng(config.shuffle_seed, streams::kShuffle | e).shuffle(order);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      schedule[e].emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                               order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return schedule;
}

TrainResult train(const Dataset& data, const TrainConfig& config, const ModelConfig& model_config,
                  const TrainOptions& options) {
  config.validate();
  model_config.validate();
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  if (data.feature_dim() != model_config.input_dim()) {
    throw ShapeError("dataset has " + std::to_string(data.feature_dim()) +
                     " features, model expects " + std::to_string(model_config.input_dim()));
  }
  if (data.n_classes() != model_config.num_classes()) {
    throw ShapeError("dataset has " + std::to_string(data.n_classes()) + " classes, model has " +
                     std::to_string(model_config.num_classes()));
  }
  if (options.excluded_id && *options.excluded_id >= data.size()) {
    throw DataError("excluded id " + std::to_string(*options.excluded_id) + " is not in the dataset");
  }
  std::optional<MaskGenerator> generator;
  if (config.turnover) {
    model_config.check_plan(*config.turnover);
    generator.emplace(*config.turnover);
  }

  TrainResult result;
  result.model.config = model_config;
  result.model.plan = config.turnover;
  ModelParams& params = result.model.params;
  if (options.initial != nullptr) {
    check_shapes(*options.initial, model_config);
    params = *options.initial;
  } else {
    params = init_params(model_config, config.init_seed);
  }

  Velocity velocity;
  for (const auto& w : params.weights) velocity.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : params.biases) velocity.biases.emplace_back(b.size(), 0.0);

  double initial_loss = 0.0;
  if (options.monitor != nullptr) {
    const auto first = log_curves(result.model, data, *options.monitor);
    initial_loss = first.full_train_loss;
    result.log.records.push_back(first);
  }

  const Schedule schedule = make_schedule(data.size(), config);
  double lr = config.learning_rate;
  for (std::size_t e = 0; e < schedule.size(); ++e) {
    if (config.decay && e > 0 && e % config.decay->every_epochs == 0) lr *= config.decay->factor;
    for (const auto& batch : schedule[e]) {
      Gradients total = Gradients::zeros_like(params);
      std::size_t used = 0;
      for (const std::uint64_t id : batch) {
        if (options.excluded_id && id == *options.excluded_id) continue;
        const Instance& inst = data[id];
        std::optional<Mask> mask;
        if (generator) mask = generator->mask(id);
        const auto fwd = forward(params, model_config, inst.features, mask ? &*mask : nullptr);
        total.add(backward(params, model_config, fwd.cache, inst.label));
        ++used;
      }
      if (used == 0) {
        ++result.log.skipped_batches;
        continue;
      }
      total.scale(1.0 / static_cast<double>(used));
      sgd_step(params, velocity, total, lr, config.momentum);
    }
    if (options.monitor != nullptr) {
      auto record = log_curves(result.model, data, *options.monitor);
      record.epoch = e + 1;
      if (record.full_train_loss > 10.0 * initial_loss) result.log.diverged = true;
      result.log.records.push_back(record);
    }
  }
  return result;
}

Evaluation evaluate(const ModelParams& params, const ModelConfig& config, const Dataset& data) {
  if (data.empty()) throw DataError("cannot evaluate on an empty dataset");
  std::size_t correct = 0;
  double total_loss = 0.0;
  for (const auto& inst : data.instances()) {
    const Vector out = logits(params, config, inst.features);
    if (argmax(out) == inst.label) ++correct;
    total_loss += cross_entropy(out, inst.label);
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, total_loss / n};
}

CurveRecord log_curves(const TrainedModel& model, const Dataset& train_set, const Dataset& test_set) {
  CurveRecord record;
  const auto train_eval = evaluate(model.params, model.config, train_set);
  const auto test_eval = evaluate(model.params, model.config, test_set);
  record.full_train_loss = train_eval.mean_loss;
  record.test_loss = test_eval.mean_loss;
  record.test_accuracy = test_eval.accuracy;
  if (!model.plan) {
    record.masked_train_loss = record.flipped_train_loss = record.full_train_loss;
    return record;
  }
  const MaskGenerator generator(*model.plan);
  double masked = 0.0;
  double flipped = 0.0;
  for (const auto& inst : train_set.instances()) {
    const Mask m = generator.mask(inst.id);
    const Mask f = flip_mask(m, generator.plan());
    masked += loss_on(model.params, model.config, inst.features, inst.label, &m);
    flipped += loss_on(model.params, model.config, inst.features, inst.label, &f);
  }
  const double n = static_cast<double>(train_set.size());
  record.masked_train_loss = masked / n;
  record.flipped_train_loss = flipped / n;
  return record;
}

void write_curves_csv(const std::vector<CurveRecord>& records, std::ostream& out) {
  out << "epoch,masked_train_loss,flipped_train_loss,full_train_loss,test_loss,test_accuracy\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << csv::real(r.masked_train_loss) << ',' << csv::real(r.flipped_train_loss)
        << ',' << csv::real(r.full_train_loss) << ',' << csv::real(r.test_loss) << ','
        << csv::real(r.test_accuracy) << '\n';
  }
}

}  // namespace turnover
