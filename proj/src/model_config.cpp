#include "asr/model_config.hpp"

#include "asr/errors.hpp"

namespace asr {

NoiseModel parse_noise_model(const std::string& s) {
  if (s == "gaussian") return NoiseModel::Gaussian;
  if (s == "bernoulli") return NoiseModel::Bernoulli;
  throw ConfigError("unknown noise model: " + s);
}

std::string to_string(NoiseModel m) { return m == NoiseModel::Gaussian ? "gaussian" : "bernoulli"; }

PriorKind parse_prior_kind(const std::string& s) {
  if (s == "learned") return PriorKind::Learned;
  if (s == "fixed") return PriorKind::Fixed;
  throw ConfigError("unknown prior kind: " + s);
}

std::string to_string(PriorKind p) { return p == PriorKind::Learned ? "learned" : "fixed"; }

void ModelConfig::validate() const {
  if (S < 1 || G < 1 || A < 1 || K < 1) throw ContractViolation("model config: S, G, A, K must be >= 1");
  if (G > S) throw ContractViolation("model config: glyph larger than canvas");
  if (lstm_hidden < 1 || image_hidden < 1) throw ContractViolation("model config: hidden widths must be >= 1");
  if (noise == NoiseModel::Gaussian && !(sigma > 0)) throw ContractViolation("model config: sigma must be > 0");
  if (!(bernoulli_clamp > 0 && bernoulli_clamp < 0.5)) throw ContractViolation("model config: bad bernoulli clamp");
  if (!(fixed_continue_prob > 0 && fixed_continue_prob < 1)) {
    throw ContractViolation("model config: fixed continue probability must be in (0,1)");
  }
  if (!(fixed_loc_std > 0 && fixed_scale_std > 0 && scale_gain > 0 && loc_gain > 0)) {
    throw ContractViolation("model config: scales must be positive");
  }
}

}  // namespace asr
