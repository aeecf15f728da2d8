// Batched latent trajectories shared by the prior and the posterior.
#pragma once

#include <optional>
#include <vector>

#include "asr/autodiff.hpp"
#include "asr/model_config.hpp"
#include "asr/scene.hpp"

namespace asr {

/// Square grid of pixel intensities.
struct Canvas {
  Matrix pixels;  // size x size

  static Canvas zeros(int size) { return {Matrix::Zero(size, size)}; }
  int size() const { return static_cast<int>(pixels.rows()); }
  /// 1 x size^2 row view copy.
  Matrix flat() const {
    return Eigen::Map<const Matrix>(pixels.data(), 1, pixels.size());
  }
  static Canvas from_flat(const Matrix& row, int size) {
    return {Eigen::Map<const Matrix>(row.data(), size, size)};
  }
};

using Glyph = Canvas;

/// Diagonal Gaussian emitted by a head (B x d each).
struct GaussianHead {
  ad::Var mean;
  ad::Var logvar;
};

/// One unrolled step of a batch of trajectories.
struct StepSample {
  ad::Var continue_logit;  // B x 1; invalid when steps are fixed or forced
  Matrix alive_before;     // B x 1: trajectory still running before this decision
  Matrix pres;             // B x 1: z_pres^t (meaningful where alive_before)
  Matrix mask;             // B x 1: object t exists
  ad::Var loc;             // B x 2 (x, y)
  ad::Var scale_raw;       // B x 1 pre-softplus scale
  ad::Var scale;           // B x 1
  ad::Var app;             // B x A
  ad::Var log_stop;        // B x 1 log-prob of the decision (0 where not decided)
  ad::Var log_latent;      // B x 1 log-density of (loc, scale_raw, app), masked
  GaussianHead loc_dist;   // distributions the latents were scored under
  GaussianHead scale_dist;
  GaussianHead app_dist;
  bool decided = true;     // false when presence was fixed or forced
};

struct Trajectory {
  std::vector<StepSample> steps;

  Eigen::Index batch() const { return steps.empty() ? 0 : steps.front().mask.rows(); }
  int K() const { return static_cast<int>(steps.size()); }
  /// Objects per datum.
  std::vector<int> counts() const;
  /// B x K continue probabilities (invalid Var when presence is not sampled).
  ad::Var continue_probs() const;
  /// B x K masks.
  Matrix mask_matrix() const;
  /// B x 1 sums over steps.
  ad::Var total_log_stop() const;
  ad::Var total_log_latent() const;
};

/// Externally supplied latent values for scoring a known trajectory.
struct GivenStep {
  Matrix pres;       // B x 1
  Matrix loc;        // B x 2
  Matrix scale_raw;  // B x 1
  Matrix app;        // B x A
};

struct SampleOptions {
  /// Presence pinned per datum (teacher forcing); no decisions are scored.
  std::optional<std::vector<int>> forced_counts;
  /// Use distribution means instead of sampling continuous latents.
  bool use_means = false;
};

/// Pre-softplus coordinate of a positive scale.
double inverse_softplus(double s);

/// Normalized per-object features fed to the next recurrent step.
ad::Var latent_features(const ModelConfig& cfg, const ad::Var& loc, const ad::Var& scale, const ad::Var& app);

/// KL between diagonal Gaussians summed over columns: B x d -> B x 1.
ad::Var gaussian_kl(const GaussianHead& q, const GaussianHead& p);

/// Converts a batch trajectory to per-datum scenes. When `truncate` is set,
/// continue_probs keeps only the steps up to and including termination.
std::vector<SceneLatent> to_scenes(const Trajectory& traj, bool truncate);

/// Rebuilds GivenStep values (B = 1) from a scene; steps past n get zero
/// latents and pres = 0 on the terminating step.
std::vector<GivenStep> given_from_scene(const SceneLatent& scene, int K, int A);

}  // namespace asr
