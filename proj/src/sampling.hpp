// Helpers shared by the prior and posterior samplers.
#pragma once

#include "asr/generative.hpp"

namespace asr::detail {

inline Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<Real>(rng.normal());
  return m;
}

/// mean + exp(logvar / 2) * eps. Noise is drawn even with use_means so the
/// random stream does not depend on the flag.
inline ad::Var reparam(ad::Tape& tape, const GaussianHead& g, Rng& rng, bool use_means) {
  Matrix eps = normal_matrix(rng, g.mean.rows(), g.mean.cols());
  if (use_means) return g.mean;
  return g.mean + ad::exp(g.logvar * Real(0.5)) * tape.constant(std::move(eps));
}

/// base + limit * tanh(raw / limit).
inline ad::Var bounded_logvar(const ad::Var& raw, double base, double limit = 8.0) {
  return ad::tanh(raw * static_cast<Real>(1.0 / limit)) * static_cast<Real>(limit) + static_cast<Real>(base);
}

struct Presence {
  Matrix alive_before;
  Matrix pres;
  Matrix mask;
  bool decided = true;
};

/// Presence for step t. `continue_prob` holds p(z_pres = 1) per row.
inline Presence decide_presence(const Matrix& alive_before, const Matrix& continue_prob, int t, Rng& rng,
                                const SampleOptions& opts, const GivenStep* given, bool fixed_steps) {
  const Eigen::Index B = alive_before.rows();
  Presence p;
  p.alive_before = alive_before;
  p.pres = Matrix::Zero(B, 1);
  Matrix u(B, 1);
  for (Eigen::Index b = 0; b < B; ++b) u(b, 0) = static_cast<Real>(rng.uniform());
  if (fixed_steps) {
    p.pres.setOnes();
    p.decided = false;
  } else if (opts.forced_counts) {
    for (Eigen::Index b = 0; b < B; ++b) p.pres(b, 0) = t < (*opts.forced_counts)[static_cast<std::size_t>(b)] ? 1 : 0;
    p.decided = false;
  } else if (given != nullptr) {
    p.pres = given->pres;
  } else {
    for (Eigen::Index b = 0; b < B; ++b) p.pres(b, 0) = u(b, 0) < continue_prob(b, 0) ? 1 : 0;
  }
  p.pres = p.pres.cwiseProduct(alive_before);
  p.mask = p.pres;
  return p;
}

/// alive * log p(pres | logit); B x 1.
inline ad::Var log_decision(ad::Tape& tape, const ad::Var& logit, const Matrix& pres, const Matrix& alive) {
  ad::Var on = ad::log_sigmoid(logit);
  ad::Var off = ad::log_sigmoid(-logit);
  Matrix w_on = pres.cwiseProduct(alive);
  Matrix w_off = (Matrix::Ones(pres.rows(), 1) - pres).cwiseProduct(alive);
  return on * tape.constant(std::move(w_on)) + off * tape.constant(std::move(w_off));
}

inline Matrix sigmoid_values(const Matrix& logits) {
  return (Real(1) / (Real(1) + (-logits.array()).exp())).matrix();
}

}  // namespace asr::detail
