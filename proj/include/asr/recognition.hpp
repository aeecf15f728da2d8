// Amortized posterior q(z, n | x): an image embedding drives a recurrent
// inference net that emits stop, location, and scale posteriors; appearance
// posteriors come from an attention crop at the inferred box.
#pragma once

#include <array>
#include <vector>

#include "asr/generative.hpp"

namespace asr {

/// Outputs of one inference step on a single image.
struct InferStep {
  double stop_prob = 0.5;  // q(z_pres = 1)
  std::array<double, 2> loc_mean{};
  std::array<double, 2> loc_logvar{};
  /// Evaluated at loc_mean, and for appearance at (loc_mean, softplus(scale_mean)).
  double scale_mean = 0.0;
  double scale_logvar = 0.0;
  std::vector<double> app_mean;
  std::vector<double> app_logvar;
  RecurrentState next;
};

class RecognitionModel {
 public:
  /// Registers parameters named "rec.*" in `store`.
  RecognitionModel(const ModelConfig& cfg, nn::ParamStore& store, Rng& init_rng);

  const ModelConfig& config() const { return cfg_; }

  // ---- batched, on a tape ----
  struct Step {
    ad::Var continue_logit;
    GaussianHead loc;
    nn::LstmState state;
  };
  /// B x S*S -> B x image_hidden.
  ad::Var encode_image(ad::Tape& tape, const ad::Var& x) const;
  Step step(ad::Tape& tape, const nn::LstmState& state, const ad::Var& embedding, const ad::Var& prev_features) const;
  GaussianHead scale_head(ad::Tape& tape, const nn::LstmState& state, const ad::Var& loc) const;
  GaussianHead app_head(ad::Tape& tape, const ad::Var& x, const ad::Var& loc, const ad::Var& scale) const;

  /// Samples q(z, n | x) for a batch of images (B x S*S). Continuous latents
  /// are reparameterized; stop decisions are hard Bernoulli draws.
  Trajectory sample(ad::Tape& tape, const ad::Var& x, Rng& rng, const SampleOptions& opts = {},
                    const std::vector<GivenStep>* given = nullptr) const;

  // ---- single image ----
  InferStep infer_step(const RecurrentState& state, const Canvas& x, const ObjectLatent* prev) const;
  RecurrentState initial_recurrent_state() const;
  SceneLatent sample_posterior_scene(const Canvas& x, int K, Rng& rng) const;
  /// Re-evaluates log q of a scene produced with K steps.
  double log_posterior(const Canvas& x, const SceneLatent& scene, int K) const;
  /// Mean of induced_count_distribution over `samples` trajectories.
  CountDistribution count_posterior(const Canvas& x, int K, Rng& rng, int samples) const;

 private:
  ModelConfig cfg_;
  nn::Mlp image_encoder_;
  nn::LstmCell lstm_;
  nn::Linear stop_head_;
  nn::Linear loc_head_;
  nn::Linear scale_head_;
  nn::Mlp app_encoder_;
  nn::Linear app_out_;
};

}  // namespace asr
