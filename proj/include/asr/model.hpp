// Generative and recognition networks sharing one parameter store, plus the
// checkpoint archive.
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "asr/generative.hpp"
#include "asr/recognition.hpp"

namespace asr {

/// air: fixed prior; air-pprior: learned prior; air-asr: learned prior with
/// constraint penalties.
enum class Variant { Air, AirPPrior, AirAsr };
Variant parse_variant(const std::string& s);
std::string to_string(Variant v);

class AsrModel {
 public:
  /// Parameters are initialized from cfg.init_seed.
  explicit AsrModel(const ModelConfig& cfg);
  AsrModel(const AsrModel&) = delete;
  AsrModel& operator=(const AsrModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  const GenerativeModel& gen() const { return *gen_; }
  const RecognitionModel& rec() const { return *rec_; }

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  std::unique_ptr<GenerativeModel> gen_;
  std::unique_ptr<RecognitionModel> rec_;
};

/// Per-step exponential moving average of the downstream objective.
struct BaselineState {
  std::vector<double> values;
  bool ready = false;
};

/// Optimizer and bookkeeping state stored next to the parameters.
struct TrainingState {
  int epoch = 0;  // completed epochs
  std::int64_t adam_steps = 0;
  BaselineState baseline;
  /// Free-form header entries (variant, config hash, ...).
  std::map<std::string, std::string> info;
};

struct Checkpoint {
  std::unique_ptr<AsrModel> model;
  TrainingState state;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const AsrModel& model, const TrainingState& state);
Checkpoint load_checkpoint(const std::string& path);

/// Key/value text form of a model configuration (also the checkpoint header).
std::map<std::string, std::string> model_config_fields(const ModelConfig& cfg);
ModelConfig model_config_from_fields(const std::map<std::string, std::string>& fields);

}  // namespace asr
