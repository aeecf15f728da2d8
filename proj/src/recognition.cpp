#include "asr/recognition.hpp"

#include <cmath>

#include "asr/errors.hpp"
#include "asr/spatial.hpp"
#include "sampling.hpp"

namespace asr {

namespace {

int feature_dim(const ModelConfig& cfg) { return 3 + cfg.A; }

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite value");
}

void check_canvas(const Canvas& x, int S, const char* what) {
  if (x.size() != S || x.pixels.cols() != S) throw ContractViolation(std::string(what) + ": image size mismatch");
}

}  // namespace

RecognitionModel::RecognitionModel(const ModelConfig& cfg, nn::ParamStore& store, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  const int H = cfg_.lstm_hidden;
  image_encoder_ = nn::Mlp::create(store, "rec.img", {cfg_.S * cfg_.S, cfg_.image_hidden}, init_rng);
  lstm_ = nn::LstmCell::create(store, "rec.lstm", cfg_.image_hidden + feature_dim(cfg_), H, init_rng);
  stop_head_ = nn::Linear::create(store, "rec.stop", H, 1, init_rng, cfg_.head_init_gain);
  stop_head_.b->value.setConstant(static_cast<Real>(cfg_.init_continue_bias));
  loc_head_ = nn::Linear::create(store, "rec.loc", H, 4, init_rng, cfg_.head_init_gain);
  scale_head_ = nn::Linear::create(store, "rec.scale", H + 2, 2, init_rng, cfg_.head_init_gain);
  std::vector<int> enc{cfg_.G * cfg_.G};
  enc.insert(enc.end(), cfg_.app_encoder.begin(), cfg_.app_encoder.end());
  app_encoder_ = nn::Mlp::create(store, "rec.app", enc, init_rng);
  app_out_ = nn::Linear::create(store, "rec.app_out", enc.back(), 2 * cfg_.A, init_rng, cfg_.head_init_gain);
}

ad::Var RecognitionModel::encode_image(ad::Tape& tape, const ad::Var& x) const {
  if (x.cols() != cfg_.S * cfg_.S) throw ContractViolation("encode_image: image size mismatch");
  return ad::relu(image_encoder_(tape, x));
}

RecognitionModel::Step RecognitionModel::step(ad::Tape& tape, const nn::LstmState& state, const ad::Var& embedding,
                                              const ad::Var& prev_features) const {
  Step s;
  s.state = lstm_.step(tape, ad::concat_cols({embedding, prev_features}), state);
  s.continue_logit = stop_head_(tape, s.state.h);
  ad::Var raw = loc_head_(tape, s.state.h);
  s.loc.mean = ad::slice_cols(raw, 0, 2) * static_cast<Real>(cfg_.loc_gain) + static_cast<Real>(cfg_.S) / 2;
  s.loc.logvar =
      detail::bounded_logvar(ad::slice_cols(raw, 2, 2), 2 * std::log(cfg_.loc_gain) + cfg_.posterior_logvar_offset);
  return s;
}

GaussianHead RecognitionModel::scale_head(ad::Tape& tape, const nn::LstmState& state, const ad::Var& loc) const {
  const Real half = static_cast<Real>(cfg_.S) / 2;
  ad::Var raw = scale_head_(tape, ad::concat_cols({state.h, (loc - half) * (1 / half)}));
  return {ad::col(raw, 0) * static_cast<Real>(cfg_.scale_gain) + static_cast<Real>(cfg_.scale_offset),
          detail::bounded_logvar(ad::col(raw, 1), 2 * std::log(cfg_.scale_gain) + cfg_.posterior_logvar_offset)};
}

GaussianHead RecognitionModel::app_head(ad::Tape& tape, const ad::Var& x, const ad::Var& loc,
                                        const ad::Var& scale) const {
  ad::Var window = spatial::crop(x, ad::col(loc, 0), ad::col(loc, 1), scale, cfg_.S, cfg_.G);
  ad::Var raw = app_out_(tape, ad::relu(app_encoder_(tape, window)));
  return {ad::slice_cols(raw, 0, cfg_.A),
          detail::bounded_logvar(ad::slice_cols(raw, cfg_.A, cfg_.A), cfg_.posterior_logvar_offset)};
}

Trajectory RecognitionModel::sample(ad::Tape& tape, const ad::Var& x, Rng& rng, const SampleOptions& opts,
                                    const std::vector<GivenStep>* given) const {
  const int K = cfg_.K;
  const Eigen::Index batch = x.rows();
  if (given && static_cast<int>(given->size()) != K) throw ContractViolation("sample: given trajectory length != K");
  if (opts.forced_counts) {
    if (static_cast<Eigen::Index>(opts.forced_counts->size()) != batch) {
      throw ContractViolation("sample: forced_counts size != batch");
    }
    for (int n : *opts.forced_counts) {
      if (n < 0 || n > K) throw ContractViolation("sample: forced count outside [0, K]");
    }
  }
  ad::Var embedding = encode_image(tape, x);
  nn::LstmState state = lstm_.zero_state(tape, batch);
  ad::Var prev = tape.constant(Matrix::Zero(batch, feature_dim(cfg_)));
  Matrix alive = Matrix::Ones(batch, 1);
  Trajectory traj;
  for (int t = 0; t < K; ++t) {
    const GivenStep* g = given ? &(*given)[static_cast<std::size_t>(t)] : nullptr;
    Step st = step(tape, state, embedding, prev);
    detail::Presence p = detail::decide_presence(alive, detail::sigmoid_values(st.continue_logit.value()), t, rng,
                                                 opts, g, cfg_.fixed_steps);
    StepSample s;
    s.continue_logit = st.continue_logit;
    s.alive_before = p.alive_before;
    s.pres = p.pres;
    s.mask = p.mask;
    s.decided = p.decided;
    s.loc = g ? tape.constant(g->loc) : detail::reparam(tape, st.loc, rng, opts.use_means);
    GaussianHead sh = scale_head(tape, st.state, s.loc);
    s.scale_raw = g ? tape.constant(g->scale_raw) : detail::reparam(tape, sh, rng, opts.use_means);
    s.scale = ad::softplus(s.scale_raw);
    GaussianHead ah = app_head(tape, x, s.loc, s.scale);
    s.app = g ? tape.constant(g->app) : detail::reparam(tape, ah, rng, opts.use_means);

    ad::Var lq = ad::gaussian_log_density(s.loc, st.loc.mean, st.loc.logvar) +
                 ad::gaussian_log_density(s.scale_raw, sh.mean, sh.logvar) +
                 ad::gaussian_log_density(s.app, ah.mean, ah.logvar);
    s.log_latent = lq * tape.constant(s.mask);
    s.loc_dist = st.loc;
    s.scale_dist = sh;
    s.app_dist = ah;
    s.log_stop = s.decided ? detail::log_decision(tape, s.continue_logit, s.pres, s.alive_before)
                           : tape.constant(Matrix::Zero(batch, 1));
    alive = p.mask;
    prev = latent_features(cfg_, s.loc, s.scale, s.app);
    state = st.state;
    traj.steps.push_back(std::move(s));
  }
  return traj;
}

RecurrentState RecognitionModel::initial_recurrent_state() const {
  return {Matrix::Zero(1, cfg_.lstm_hidden), Matrix::Zero(1, cfg_.lstm_hidden)};
}

InferStep RecognitionModel::infer_step(const RecurrentState& state, const Canvas& x, const ObjectLatent* prev) const {
  check_canvas(x, cfg_.S, "infer_step");
  if (state.h.cols() != cfg_.lstm_hidden || state.c.cols() != cfg_.lstm_hidden) {
    throw ContractViolation("infer_step: state size mismatch");
  }
  ad::Tape tape;
  ad::Var img = tape.constant(x.flat());
  ad::Var prev_feat;
  if (prev == nullptr) {
    prev_feat = tape.constant(Matrix::Zero(1, feature_dim(cfg_)));
  } else {
    if (static_cast<int>(prev->app.size()) != cfg_.A) throw ContractViolation("infer_step: appearance size mismatch");
    Matrix loc(1, 2);
    loc << static_cast<Real>(prev->x), static_cast<Real>(prev->y);
    Matrix app(1, cfg_.A);
    for (int a = 0; a < cfg_.A; ++a) app(0, a) = static_cast<Real>(prev->app[static_cast<std::size_t>(a)]);
    prev_feat =
        latent_features(cfg_, tape.constant(loc), tape.constant(static_cast<Real>(prev->scale)), tape.constant(app));
  }
  Step st = step(tape, {tape.constant(state.h), tape.constant(state.c)}, encode_image(tape, img), prev_feat);
  GaussianHead sh = scale_head(tape, st.state, st.loc.mean);
  GaussianHead ah = app_head(tape, img, st.loc.mean, ad::softplus(sh.mean));
  for (const ad::Var* v : {&st.continue_logit, &st.loc.mean, &st.loc.logvar, &sh.mean, &sh.logvar, &ah.mean,
                           &ah.logvar, &st.state.h, &st.state.c}) {
    require_finite(v->value(), "infer_step");
  }
  InferStep out;
  out.stop_prob = static_cast<double>(detail::sigmoid_values(st.continue_logit.value())(0, 0));
  for (int i = 0; i < 2; ++i) {
    out.loc_mean[static_cast<std::size_t>(i)] = st.loc.mean.value()(0, i);
    out.loc_logvar[static_cast<std::size_t>(i)] = st.loc.logvar.value()(0, i);
  }
  out.scale_mean = sh.mean.value()(0, 0);
  out.scale_logvar = sh.logvar.value()(0, 0);
  out.app_mean.assign(ah.mean.value().data(), ah.mean.value().data() + cfg_.A);
  out.app_logvar.assign(ah.logvar.value().data(), ah.logvar.value().data() + cfg_.A);
  out.next = {st.state.h.value(), st.state.c.value()};
  return out;
}

SceneLatent RecognitionModel::sample_posterior_scene(const Canvas& x, int K, Rng& rng) const {
  if (K != cfg_.K) throw ContractViolation("sample_posterior_scene: K differs from the model's step count");
  check_canvas(x, cfg_.S, "sample_posterior_scene");
  ad::Tape tape;
  Trajectory traj = sample(tape, tape.constant(x.flat()), rng);
  SceneLatent scene = to_scenes(traj, false).front();
  return scene;
}

double RecognitionModel::log_posterior(const Canvas& x, const SceneLatent& scene, int K) const {
  if (K != cfg_.K) throw ContractViolation("log_posterior: K differs from the model's step count");
  check_canvas(x, cfg_.S, "log_posterior");
  std::vector<GivenStep> given = given_from_scene(scene, K, cfg_.A);
  ad::Tape tape;
  Rng unused(0);
  Trajectory traj = sample(tape, tape.constant(x.flat()), unused, {}, &given);
  return static_cast<double>((traj.total_log_stop() + traj.total_log_latent()).scalar());
}

CountDistribution RecognitionModel::count_posterior(const Canvas& x, int K, Rng& rng, int samples) const {
  if (samples < 1) throw ContractViolation("count_posterior: samples must be >= 1");
  if (K != cfg_.K) throw ContractViolation("count_posterior: K differs from the model's step count");
  check_canvas(x, cfg_.S, "count_posterior");
  CountDistribution out;
  out.probs.assign(static_cast<std::size_t>(K + 1), 0.0);
  if (cfg_.fixed_steps) {
    out.probs.back() = 1.0;
    return out;
  }
  ad::Tape tape;
  Matrix batch = x.flat().replicate(samples, 1);
  Trajectory traj = sample(tape, tape.constant(std::move(batch)), rng);
  const Matrix probs = induced_count_distribution(traj.continue_probs()).value();
  for (int n = 0; n <= K; ++n) out.probs[static_cast<std::size_t>(n)] = static_cast<double>(probs.col(n).mean());
  return out;
}

}  // namespace asr
