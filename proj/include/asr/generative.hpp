// Recurrent learnable prior over object latents, the appearance decoder,
// and the pixel likelihood.
#pragma once

#include <array>
#include <span>
#include <vector>

#include "asr/model_config.hpp"
#include "asr/nn.hpp"
#include "asr/random.hpp"
#include "asr/trajectory.hpp"

namespace asr {

/// Plain recurrent state for single-scene use (1 x H each).
struct RecurrentState {
  Matrix h;
  Matrix c;
};

/// Outputs of one prior transition on a single scene.
struct PriorStep {
  double stop_prob = 0.5;  // p(z_pres = 1)
  std::array<double, 2> loc_mean{};
  std::array<double, 2> loc_logvar{};
  /// Scale Gaussian (over the pre-softplus coordinate) evaluated at loc_mean.
  double scale_mean = 0.0;
  double scale_logvar = 0.0;
  RecurrentState next;
};

class GenerativeModel {
 public:
  /// Registers parameters named "gen.*" in `store`.
  GenerativeModel(const ModelConfig& cfg, nn::ParamStore& store, Rng& init_rng);

  const ModelConfig& config() const { return cfg_; }

  // ---- batched, on a tape ----
  struct Transition {
    ad::Var continue_logit;  // B x 1
    GaussianHead loc;        // B x 2
    nn::LstmState state;
  };
  nn::LstmState initial_state(ad::Tape& tape, Eigen::Index batch) const;
  Transition transition(ad::Tape& tape, const nn::LstmState& state, const ad::Var& prev_features) const;
  /// Pre-softplus scale Gaussian given the step state and the sampled loc.
  GaussianHead scale_head(ad::Tape& tape, const nn::LstmState& state, const ad::Var& loc) const;
  /// B x A -> B x G*G in [0, 1].
  ad::Var decode(ad::Tape& tape, const ad::Var& app) const;

  /// Ancestral sampling of a batch of scenes. With `given`, latents and
  /// presence are taken from it and only scored.
  Trajectory sample(ad::Tape& tape, Eigen::Index batch, Rng& rng, const SampleOptions& opts = {},
                    const std::vector<GivenStep>* given = nullptr) const;

  /// Scores another trajectory (typically a posterior sample) under the
  /// prior. The result shares latents and masks with `traj`; its
  /// continue_logit, log_stop and log_latent are the prior's.
  Trajectory score(ad::Tape& tape, const Trajectory& traj) const;

  /// Mean image (B x S*S) of a trajectory: sum of masked placed glyphs,
  /// clamped under the Bernoulli noise model.
  ad::Var render_mean(ad::Tape& tape, const Trajectory& traj) const;
  /// Per-datum log p(x | mean): B x 1.
  ad::Var log_likelihood(ad::Tape& tape, const ad::Var& x, const ad::Var& mean) const;

  // ---- single scene ----
  RecurrentState initial_recurrent_state() const;
  PriorStep prior_transition(const RecurrentState& state, const ObjectLatent* prev) const;
  Glyph decode_glyph(std::span<const double> app) const;
  SceneLatent sample_prior_scene(int K, Rng& rng) const;
  /// Re-evaluates log p of a scene produced with K steps.
  double log_prior(const SceneLatent& scene, int K) const;

 private:
  ad::Var prev_features(ad::Tape& tape, const ObjectLatent* prev) const;
  bool fixed() const { return cfg_.prior == PriorKind::Fixed; }

  ModelConfig cfg_;
  nn::LstmCell lstm_;
  nn::Linear stop_head_;
  nn::Linear loc_head_;
  nn::Linear scale_head_;
  nn::Mlp decoder_;
};

/// Writes a glyph into an S x S canvas at `box`.
Canvas place_glyph(const Glyph& glyph, const BoundingBox& box, int S);
/// Elementwise sum; clamped to [clamp, 1 - clamp] under the Bernoulli model.
/// An empty list yields a zero canvas of side S.
Canvas compose_mean(std::span<const Canvas> contributions, NoiseModel noise, int S, double clamp = 1e-4);
/// Sum over pixels of log p(x | mean).
double log_likelihood(const Canvas& x, const Canvas& mean, NoiseModel noise, double sigma);

}  // namespace asr
