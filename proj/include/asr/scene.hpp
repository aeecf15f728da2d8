// Latent scene types and the count arithmetic shared by every module.
#pragma once

#include <span>
#include <vector>

#include "asr/autodiff.hpp"

namespace asr {

/// Floor applied to count probabilities before taking logs.
inline constexpr double kProbFloor = 1e-6;

/// Axis-aligned square box in pixel units.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double side = 0.0;

  double left() const { return cx - side / 2; }
  double right() const { return cx + side / 2; }
  double top() const { return cy - side / 2; }
  double bottom() const { return cy + side / 2; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ObjectLatent {
  double x = 0.0;  // loc, pixels
  double y = 0.0;
  double scale = 0.0;
  std::vector<double> app;
};

/// One sampled trajectory. The presence vector is implicit: n ones then a
/// zero (the zero is absent when n == K).
struct SceneLatent {
  std::vector<ObjectLatent> objects;
  /// p(z_pres^t = 1 | ...) for every unrolled step t = 1..K.
  std::vector<double> continue_probs;
  int n = 0;
  double log_q = 0.0;
  double log_p = 0.0;
};

/// Distribution over object counts 0..K.
struct CountDistribution {
  std::vector<double> probs;

  int max_count() const { return static_cast<int>(probs.size()) - 1; }
  double operator[](int i) const { return probs.at(static_cast<std::size_t>(i)); }
};

/// probs[n] = prod_{t<=n} p_t * (1 - p_{n+1}) for n < K and
/// probs[K] = prod_{t<=K} p_t.
CountDistribution induced_count_distribution(std::span<const double> continue_probs, int K);

/// Batched, differentiable version: B x K continue probabilities to
/// B x (K+1) count probabilities.
ad::Var induced_count_distribution(const ad::Var& continue_probs);

/// KL(point mass at i || q) = -log max(q[i], kProbFloor).
double point_mass_kl(int i, const CountDistribution& q);

BoundingBox box_from_latent(const ObjectLatent& o);
std::vector<BoundingBox> boxes_of(const SceneLatent& scene);

}  // namespace asr
