#include "asr/trajectory.hpp"

#include <cmath>

#include "asr/errors.hpp"

namespace asr {

std::vector<int> Trajectory::counts() const {
  std::vector<int> out(static_cast<std::size_t>(batch()), 0);
  for (const auto& s : steps) {
    for (Eigen::Index b = 0; b < s.mask.rows(); ++b) out[static_cast<std::size_t>(b)] += s.mask(b, 0) > 0.5 ? 1 : 0;
  }
  return out;
}

ad::Var Trajectory::continue_probs() const {
  if (steps.empty() || !steps.front().decided) return {};
  std::vector<ad::Var> cols;
  for (const auto& s : steps) cols.push_back(ad::sigmoid(s.continue_logit));
  return ad::concat_cols(cols);
}

Matrix Trajectory::mask_matrix() const {
  Matrix m(batch(), K());
  for (int t = 0; t < K(); ++t) m.col(t) = steps[static_cast<std::size_t>(t)].mask;
  return m;
}

ad::Var Trajectory::total_log_stop() const {
  ad::Var acc = steps.front().log_stop;
  for (std::size_t t = 1; t < steps.size(); ++t) acc = acc + steps[t].log_stop;
  return acc;
}

ad::Var Trajectory::total_log_latent() const {
  ad::Var acc = steps.front().log_latent;
  for (std::size_t t = 1; t < steps.size(); ++t) acc = acc + steps[t].log_latent;
  return acc;
}

double inverse_softplus(double s) {
  if (!(s > 0)) throw ContractViolation("inverse_softplus: scale must be positive");
  return s + std::log(-std::expm1(-s));
}

ad::Var latent_features(const ModelConfig& cfg, const ad::Var& loc, const ad::Var& scale, const ad::Var& app) {
  const Real half = static_cast<Real>(cfg.S) / 2;
  ad::Var l = (loc - half) * (1 / half);
  ad::Var s = (scale - static_cast<Real>(cfg.scale_offset)) * static_cast<Real>(1.0 / cfg.scale_gain);
  return ad::concat_cols({l, s, app});
}

ad::Var gaussian_kl(const GaussianHead& q, const GaussianHead& p) {
  ad::Var ratio = (ad::exp(q.logvar) + ad::square(q.mean - p.mean)) / ad::exp(p.logvar);
  return ad::row_sum(p.logvar - q.logvar + ratio - Real(1)) * Real(0.5);
}

std::vector<SceneLatent> to_scenes(const Trajectory& traj, bool truncate) {
  const Eigen::Index B = traj.batch();
  std::vector<SceneLatent> out(static_cast<std::size_t>(B));
  ad::Var cp = traj.continue_probs();
  ad::Var lq = traj.total_log_stop() + traj.total_log_latent();
  for (Eigen::Index b = 0; b < B; ++b) {
    SceneLatent& sc = out[static_cast<std::size_t>(b)];
    for (int t = 0; t < traj.K(); ++t) {
      const StepSample& s = traj.steps[static_cast<std::size_t>(t)];
      const bool alive = s.alive_before(b, 0) > 0.5;
      if (cp.valid() && (!truncate || alive)) sc.continue_probs.push_back(static_cast<double>(cp.value()(b, t)));
      if (s.mask(b, 0) > 0.5) {
        ObjectLatent o;
        o.x = s.loc.value()(b, 0);
        o.y = s.loc.value()(b, 1);
        o.scale = s.scale.value()(b, 0);
        o.app.assign(s.app.value().row(b).data(), s.app.value().row(b).data() + s.app.cols());
        sc.objects.push_back(std::move(o));
      }
    }
    sc.n = static_cast<int>(sc.objects.size());
    sc.log_q = static_cast<double>(lq.value()(b, 0));
  }
  return out;
}

std::vector<GivenStep> given_from_scene(const SceneLatent& scene, int K, int A) {
  if (scene.n > K || scene.n != static_cast<int>(scene.objects.size())) {
    throw ContractViolation("given_from_scene: inconsistent object count");
  }
  std::vector<GivenStep> out;
  for (int t = 0; t < K; ++t) {
    GivenStep g;
    g.pres = Matrix::Constant(1, 1, t < scene.n ? 1 : 0);
    g.loc = Matrix::Zero(1, 2);
    g.scale_raw = Matrix::Zero(1, 1);
    g.app = Matrix::Zero(1, A);
    if (t < scene.n) {
      const ObjectLatent& o = scene.objects[static_cast<std::size_t>(t)];
      if (static_cast<int>(o.app.size()) != A) throw ContractViolation("given_from_scene: appearance size mismatch");
      g.loc << static_cast<Real>(o.x), static_cast<Real>(o.y);
      g.scale_raw(0, 0) = static_cast<Real>(inverse_softplus(o.scale));
      for (int a = 0; a < A; ++a) g.app(0, a) = static_cast<Real>(o.app[static_cast<std::size_t>(a)]);
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace asr
