#include "asr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asr/errors.hpp"

namespace asr {

CountDistribution induced_count_distribution(std::span<const double> continue_probs, int K) {
  if (K < 0 || continue_probs.size() != static_cast<std::size_t>(K)) {
    throw ContractViolation("induced_count_distribution: expected " + std::to_string(K) + " probabilities, got " +
                            std::to_string(continue_probs.size()));
  }
  CountDistribution out;
  out.probs.assign(static_cast<std::size_t>(K) + 1, 0.0);
  double alive = 1.0;
  for (int n = 0; n < K; ++n) {
    const double p = continue_probs[static_cast<std::size_t>(n)];
    if (!(p >= 0.0 && p <= 1.0)) throw ContractViolation("induced_count_distribution: probability outside [0,1]");
    out.probs[static_cast<std::size_t>(n)] = alive * (1.0 - p);
    alive *= p;
  }
  out.probs[static_cast<std::size_t>(K)] = alive;
  return out;
}

ad::Var induced_count_distribution(const ad::Var& continue_probs) {
  ad::Tape& tape = *continue_probs.tape();
  const Eigen::Index K = continue_probs.cols();
  std::vector<ad::Var> parts;
  parts.reserve(static_cast<std::size_t>(K) + 1);
  ad::Var alive = tape.constant(Matrix::Ones(continue_probs.rows(), 1));
  for (Eigen::Index t = 0; t < K; ++t) {
    ad::Var p = ad::col(continue_probs, t);
    parts.push_back(alive * (Real(1) - p));
    alive = alive * p;
  }
  parts.push_back(alive);
  return ad::concat_cols(parts);
}

double point_mass_kl(int i, const CountDistribution& q) {
  if (i < 0 || i > q.max_count()) {
    throw ContractViolation("point_mass_kl: count " + std::to_string(i) + " outside 0.." +
                            std::to_string(q.max_count()));
  }
  return -std::log(std::max(q[i], kProbFloor));
}

BoundingBox box_from_latent(const ObjectLatent& o) { return {o.x, o.y, o.scale}; }

std::vector<BoundingBox> boxes_of(const SceneLatent& scene) {
  std::vector<BoundingBox> out;
  out.reserve(scene.objects.size());
  for (const auto& o : scene.objects) out.push_back(box_from_latent(o));
  return out;
}

}  // namespace asr
