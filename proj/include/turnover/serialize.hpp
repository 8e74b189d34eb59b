#pragma once
// JSON forms of configs and checkpoints. Doubles are written in their shortest
// round-trip form, so a loaded checkpoint is bit-identical to the saved one.
// Readers reject unknown keys and fill absent ones with defaults.
#include <filesystem>
#include <string>

#include "json.hpp"
#include "turnover/mask.hpp"
#include "turnover/network.hpp"
#include "turnover/synthetic.hpp"
#include "turnover/training.hpp"

namespace turnover {

using Json = nlohmann::json;

void to_json(Json& j, const ModelConfig& config);
void from_json(const Json& j, ModelConfig& config);
void to_json(Json& j, const MaskPlan& plan);
void from_json(const Json& j, MaskPlan& plan);
void to_json(Json& j, const StepDecay& decay);
void from_json(const Json& j, StepDecay& decay);
void to_json(Json& j, const TrainConfig& config);
void from_json(const Json& j, TrainConfig& config);
void to_json(Json& j, const SyntheticSpec& spec);
void from_json(const Json& j, SyntheticSpec& spec);
void to_json(Json& j, const ModelParams& params);
void from_json(const Json& j, ModelParams& params);
void to_json(Json& j, const TrainedModel& model);
void from_json(const Json& j, TrainedModel& model);

Json scheme_to_json(const MaskScheme& scheme);
MaskScheme scheme_from_json(const Json& j);

/// Throws ConfigError naming `where` if `j` is not an object or has a key
/// outside `allowed`.
void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

/// FNV-1a 64 of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

struct Checkpoint {
  TrainedModel model;
  /// Hash of the experiment config that produced the model.
  std::string config_hash;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws PreconditionError if the file is missing, DataError if it is not a
/// valid checkpoint.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Reads a whole file; throws PreconditionError if it cannot be opened.
std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace turnover
