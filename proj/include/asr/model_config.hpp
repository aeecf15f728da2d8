#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace asr {

enum class NoiseModel { Gaussian, Bernoulli };
enum class PriorKind { Learned, Fixed };

NoiseModel parse_noise_model(const std::string& s);
std::string to_string(NoiseModel m);
PriorKind parse_prior_kind(const std::string& s);
std::string to_string(PriorKind p);

/// Architecture and likelihood settings shared by the generative and
/// recognition networks.
struct ModelConfig {
  int S = 50;  // canvas side
  int G = 20;  // glyph side
  int A = 50;  // appearance code size
  int K = 3;   // maximum steps

  int lstm_hidden = 256;
  int image_hidden = 256;
  std::vector<int> app_encoder{512, 256};
  std::vector<int> app_decoder{256, 512};

  NoiseModel noise = NoiseModel::Gaussian;
  double sigma = 0.3;
  double bernoulli_clamp = 1e-4;

  PriorKind prior = PriorKind::Learned;
  /// Fixed prior: geometric count with this continue probability, and
  /// independent Gaussians for loc and the pre-softplus scale.
  double fixed_continue_prob = 0.5;
  double fixed_loc_std = 12.5;
  double fixed_scale_mean = 20.0;
  double fixed_scale_std = 5.0;

  /// Head parametrization: loc = S/2 + loc_gain * raw,
  /// pre-softplus scale = scale_offset + scale_gain * raw.
  double loc_gain = 12.5;
  double scale_offset = 20.0;
  double scale_gain = 5.0;
  double posterior_logvar_offset = 0.0;
  double init_continue_bias = 0.0;
  double head_init_gain = 0.1;

  /// Every step emits an object; no stop decisions are sampled.
  bool fixed_steps = false;

  std::uint64_t init_seed = 0;

  void validate() const;
};

}  // namespace asr
