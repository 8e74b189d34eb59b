#include "turnover/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "turnover/error.hpp"

namespace turnover {

namespace {

constexpr const char* kCheckpointFormat = "turnover-checkpoint";
constexpr int kCheckpointVersion = 1;

template <typename T>
T value_or(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->template get<T>();
}

template <typename T>
std::optional<T> optional_at(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

Json shape_to_json(const SyntheticShape& shape) {
  if (const auto* blobs = std::get_if<GaussianBlobs>(&shape)) {
    return {{"kind", "gaussian_blobs"}, {"means", blobs->means}, {"stddev", blobs->stddev}};
  }
  return {{"kind", "two_arcs"}, {"noise", std::get<TwoArcs>(shape).noise}};
}

SyntheticShape shape_from_json(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian_blobs") {
    require_keys(j, {"kind", "means", "stddev"}, "gaussian_blobs");
    GaussianBlobs blobs;
    blobs.means = j.at("means").get<std::vector<Vector>>();
    blobs.stddev = value_or(j, "stddev", 1.0);
    return blobs;
  }
  if (kind == "two_arcs") {
    require_keys(j, {"kind", "noise"}, "two_arcs");
    return TwoArcs{value_or(j, "noise", 0.1)};
  }
  throw ConfigError("unknown synthetic shape '" + kind + "' (expected gaussian_blobs or two_arcs)");
}

}  // namespace

void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

void to_json(Json& j, const ModelConfig& config) {
  std::vector<int> masked;
  for (bool m : config.masked_layers) masked.push_back(m ? 1 : 0);
  j = {{"layer_widths", config.layer_widths},
       {"activation", "relu"},
       {"masked_layers", masked},
       {"output_bias", config.output_bias},
       {"keep_prob", config.keep_prob}};
}

void from_json(const Json& j, ModelConfig& config) {
  require_keys(j, {"layer_widths", "activation", "masked_layers", "output_bias", "keep_prob"}, "model");
  if (value_or<std::string>(j, "activation", "relu") != "relu") {
    throw ConfigError("model: only the relu activation is supported");
  }
  config = ModelConfig::mlp(j.at("layer_widths").get<std::vector<std::size_t>>(),
                            value_or(j, "keep_prob", 0.5));
  if (auto masked = optional_at<std::vector<int>>(j, "masked_layers")) {
    config.masked_layers.assign(masked->begin(), masked->end());
  }
  config.output_bias = value_or(j, "output_bias", false);
}

Json scheme_to_json(const MaskScheme& scheme) {
  if (const auto* h = std::get_if<HashComposedScheme>(&scheme)) {
    return {{"kind", "hash"}, {"codebook_size", h->codebook_size}, {"arity", h->arity}};
  }
  return {{"kind", "direct"}};
}

MaskScheme scheme_from_json(const Json& j) {
  require_keys(j, {"kind", "codebook_size", "arity"}, "mask scheme");
  const auto kind = value_or<std::string>(j, "kind", "direct");
  if (kind == "direct") return DirectScheme{};
  if (kind == "hash") {
    HashComposedScheme h;
    h.codebook_size = value_or(j, "codebook_size", h.codebook_size);
    h.arity = value_or(j, "arity", h.arity);
    return h;
  }
  throw ConfigError("unknown mask scheme '" + kind + "' (expected direct or hash)");
}

void to_json(Json& j, const MaskPlan& plan) {
  j = {{"global_seed", plan.global_seed},
       {"keep_prob", plan.keep_prob},
       {"layer_widths", plan.layer_widths},
       {"scheme", scheme_to_json(plan.scheme)}};
}

void from_json(const Json& j, MaskPlan& plan) {
  require_keys(j, {"global_seed", "keep_prob", "layer_widths", "scheme"}, "mask plan");
  plan.global_seed = j.at("global_seed").get<std::uint64_t>();
  plan.keep_prob = j.at("keep_prob").get<double>();
  plan.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
  plan.scheme = j.contains("scheme") ? scheme_from_json(j.at("scheme")) : MaskScheme{DirectScheme{}};
}

void to_json(Json& j, const StepDecay& decay) {
  j = {{"every_epochs", decay.every_epochs}, {"factor", decay.factor}};
}

void from_json(const Json& j, StepDecay& decay) {
  require_keys(j, {"every_epochs", "factor"}, "decay");
  decay.every_epochs = j.at("every_epochs").get<std::size_t>();
  decay.factor = value_or(j, "factor", 0.1);
}

void to_json(Json& j, const TrainConfig& config) {
  j = {{"learning_rate", config.learning_rate},
       {"momentum", config.momentum},
       {"batch_size", config.batch_size},
       {"epochs", config.epochs},
       {"shuffle_seed", config.shuffle_seed},
       {"init_seed", config.init_seed},
       {"turnover", nullptr},
       {"decay", nullptr}};
  if (config.turnover) j["turnover"] = *config.turnover;
  if (config.decay) j["decay"] = *config.decay;
}

void from_json(const Json& j, TrainConfig& config) {
  require_keys(j, {"learning_rate", "momentum", "batch_size", "epochs", "shuffle_seed", "init_seed",
                   "turnover", "decay"},
               "train");
  const TrainConfig defaults;
  config.learning_rate = value_or(j, "learning_rate", defaults.learning_rate);
  config.momentum = value_or(j, "momentum", defaults.momentum);
  config.batch_size = value_or(j, "batch_size", defaults.batch_size);
  config.epochs = value_or(j, "epochs", defaults.epochs);
  config.shuffle_seed = value_or(j, "shuffle_seed", defaults.shuffle_seed);
  config.init_seed = value_or(j, "init_seed", defaults.init_seed);
  config.turnover = optional_at<MaskPlan>(j, "turnover");
  config.decay = optional_at<StepDecay>(j, "decay");
}

void to_json(Json& j, const SyntheticSpec& spec) {
  j = {{"shape", shape_to_json(spec.shape)},
       {"n_train", spec.n_train},
       {"n_val", spec.n_val},
       {"n_test", spec.n_test},
       {"seed", spec.seed},
       {"label_noise", nullptr},
       {"covariate_shift", spec.covariate_shift}};
  if (spec.label_noise) {
    j["label_noise"] = {{"rate", spec.label_noise->rate}, {"seed", spec.label_noise->seed}};
  }
}

void from_json(const Json& j, SyntheticSpec& spec) {
  require_keys(j, {"shape", "n_train", "n_val", "n_test", "seed", "label_noise", "covariate_shift"},
               "synthetic");
  const SyntheticSpec defaults;
  spec.shape = j.contains("shape") ? shape_from_json(j.at("shape")) : defaults.shape;
  spec.n_train = value_or(j, "n_train", defaults.n_train);
  spec.n_val = value_or(j, "n_val", defaults.n_val);
  spec.n_test = value_or(j, "n_test", defaults.n_test);
  spec.seed = value_or(j, "seed", defaults.seed);
  spec.label_noise.reset();
  if (auto it = j.find("label_noise"); it != j.end() && !it->is_null()) {
    require_keys(*it, {"rate", "seed"}, "label_noise");
    spec.label_noise = LabelNoise{it->at("rate").get<double>(), value_or<std::uint64_t>(*it, "seed", 0)};
  }
  spec.covariate_shift = value_or(j, "covariate_shift", Vector{});
}

void to_json(Json& j, const ModelParams& params) {
  Json weights = Json::array();
  for (const auto& w : params.weights) {
    weights.push_back({{"rows", w.rows()},
                       {"cols", w.cols()},
                       {"data", std::vector<double>(w.values().begin(), w.values().end())}});
  }
  j = {{"weights", weights}, {"biases", params.biases}, {"init_seed", params.init_seed}};
}

void from_json(const Json& j, ModelParams& params) {
  params.weights.clear();
  for (const auto& w : j.at("weights")) {
    params.weights.emplace_back(w.at("rows").get<std::size_t>(), w.at("cols").get<std::size_t>(),
                                w.at("data").get<std::vector<double>>());
  }
  params.biases = j.at("biases").get<std::vector<Vector>>();
  params.init_seed = j.at("init_seed").get<std::uint64_t>();
}

void to_json(Json& j, const TrainedModel& model) {
  j = {{"config", model.config}, {"params", model.params}, {"plan", nullptr}};
  if (model.plan) j["plan"] = *model.plan;
}

void from_json(const Json& j, TrainedModel& model) {
  model.config = j.at("config").get<ModelConfig>();
  model.params = j.at("params").get<ModelParams>();
  model.plan = optional_at<MaskPlan>(j, "plan");
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) { return fnv1a_hex(read_text(path)); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PreconditionError("cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw PreconditionError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  for (const auto& w : checkpoint.model.params.weights) {
    if (!all_finite(w.values())) throw DataError("refusing to save a checkpoint with non-finite weights");
  }
  Json j = {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"config_hash", checkpoint.config_hash},
            {"model", checkpoint.model}};
  write_text(path, j.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw PreconditionError("no checkpoint at " + path.string() + "; run `turnover train` first");
  }
  const auto text = read_text(path);
  try {
    const auto j = Json::parse(text);
    if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion) {
      throw DataError(path.string() + " is not a version " + std::to_string(kCheckpointVersion) +
                      " turnover checkpoint");
    }
    Checkpoint c;
    c.config_hash = j.at("config_hash").get<std::string>();
    c.model = j.at("model").get<TrainedModel>();
    c.model.config.validate();
    if (c.model.plan) c.model.config.check_plan(*c.model.plan);
    check_shapes(c.model.params, c.model.config);
    return c;
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": inconsistent checkpoint: " + e.what());
  }
}

}  // namespace turnover
