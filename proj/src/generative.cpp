#include "asr/generative.hpp"

#include <cmath>
#include <numbers>

#include "asr/errors.hpp"
#include "asr/spatial.hpp"
#include "sampling.hpp"

namespace asr {

namespace {

int feature_dim(const ModelConfig& cfg) { return 3 + cfg.A; }

std::vector<int> decoder_widths(const ModelConfig& cfg) {
  std::vector<int> w{cfg.A};
  w.insert(w.end(), cfg.app_decoder.begin(), cfg.app_decoder.end());
  w.push_back(cfg.G * cfg.G);
  return w;
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite value");
}

}  // namespace

GenerativeModel::GenerativeModel(const ModelConfig& cfg, nn::ParamStore& store, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  if (!fixed()) {
    const int H = cfg_.lstm_hidden;
    lstm_ = nn::LstmCell::create(store, "gen.lstm", feature_dim(cfg_), H, init_rng);
    stop_head_ = nn::Linear::create(store, "gen.stop", H, 1, init_rng, cfg_.head_init_gain);
    stop_head_.b->value.setConstant(static_cast<Real>(cfg_.init_continue_bias));
    loc_head_ = nn::Linear::create(store, "gen.loc", H, 4, init_rng, cfg_.head_init_gain);
    scale_head_ = nn::Linear::create(store, "gen.scale", H + 2, 2, init_rng, cfg_.head_init_gain);
  }
  decoder_ = nn::Mlp::create(store, "gen.dec", decoder_widths(cfg_), init_rng);
}

nn::LstmState GenerativeModel::initial_state(ad::Tape& tape, Eigen::Index batch) const {
  if (fixed()) return {};
  return lstm_.zero_state(tape, batch);
}

GenerativeModel::Transition GenerativeModel::transition(ad::Tape& tape, const nn::LstmState& state,
                                                        const ad::Var& prev_features) const {
  const Eigen::Index B = prev_features.rows();
  Transition tr;
  if (fixed()) {
    const double p = cfg_.fixed_continue_prob;
    tr.continue_logit = tape.constant(Matrix::Constant(B, 1, static_cast<Real>(std::log(p / (1 - p)))));
    tr.loc.mean = tape.constant(Matrix::Constant(B, 2, static_cast<Real>(cfg_.S) / 2));
    tr.loc.logvar = tape.constant(Matrix::Constant(B, 2, static_cast<Real>(2 * std::log(cfg_.fixed_loc_std))));
    return tr;
  }
  tr.state = lstm_.step(tape, prev_features, state);
  tr.continue_logit = stop_head_(tape, tr.state.h);
  ad::Var raw = loc_head_(tape, tr.state.h);
  tr.loc.mean = ad::slice_cols(raw, 0, 2) * static_cast<Real>(cfg_.loc_gain) + static_cast<Real>(cfg_.S) / 2;
  tr.loc.logvar = detail::bounded_logvar(ad::slice_cols(raw, 2, 2), 2 * std::log(cfg_.loc_gain));
  return tr;
}

GaussianHead GenerativeModel::scale_head(ad::Tape& tape, const nn::LstmState& state, const ad::Var& loc) const {
  const Eigen::Index B = loc.rows();
  if (fixed()) {
    return {tape.constant(Matrix::Constant(B, 1, static_cast<Real>(cfg_.fixed_scale_mean))),
            tape.constant(Matrix::Constant(B, 1, static_cast<Real>(2 * std::log(cfg_.fixed_scale_std))))};
  }
  const Real half = static_cast<Real>(cfg_.S) / 2;
  ad::Var loc_feat = (loc - half) * (1 / half);
  ad::Var raw = scale_head_(tape, ad::concat_cols({state.h, loc_feat}));
  return {ad::col(raw, 0) * static_cast<Real>(cfg_.scale_gain) + static_cast<Real>(cfg_.scale_offset),
          detail::bounded_logvar(ad::col(raw, 1), 2 * std::log(cfg_.scale_gain))};
}

ad::Var GenerativeModel::decode(ad::Tape& tape, const ad::Var& app) const {
  if (app.cols() != cfg_.A) throw ContractViolation("decode: appearance size mismatch");
  return ad::sigmoid(decoder_(tape, app));
}

Trajectory GenerativeModel::sample(ad::Tape& tape, Eigen::Index batch, Rng& rng, const SampleOptions& opts,
                                   const std::vector<GivenStep>* given) const {
  const int K = cfg_.K;
  if (given && static_cast<int>(given->size()) != K) throw ContractViolation("sample: given trajectory length != K");
  if (opts.forced_counts && static_cast<Eigen::Index>(opts.forced_counts->size()) != batch) {
    throw ContractViolation("sample: forced_counts size != batch");
  }
  Trajectory traj;
  nn::LstmState state = initial_state(tape, batch);
  ad::Var prev = tape.constant(Matrix::Zero(batch, feature_dim(cfg_)));
  Matrix alive = Matrix::Ones(batch, 1);
  for (int t = 0; t < K; ++t) {
    const GivenStep* g = given ? &(*given)[static_cast<std::size_t>(t)] : nullptr;
    Transition tr = transition(tape, state, prev);
    detail::Presence p = detail::decide_presence(alive, detail::sigmoid_values(tr.continue_logit.value()), t, rng,
                                                 opts, g, cfg_.fixed_steps);
    StepSample s;
    s.continue_logit = tr.continue_logit;
    s.alive_before = p.alive_before;
    s.pres = p.pres;
    s.mask = p.mask;
    s.decided = p.decided;
    s.loc = g ? tape.constant(g->loc) : detail::reparam(tape, tr.loc, rng, opts.use_means);
    GaussianHead sh = scale_head(tape, tr.state, s.loc);
    s.scale_raw = g ? tape.constant(g->scale_raw) : detail::reparam(tape, sh, rng, opts.use_means);
    s.scale = ad::softplus(s.scale_raw);
    GaussianHead app_prior{tape.constant(Matrix::Zero(batch, cfg_.A)), tape.constant(Matrix::Zero(batch, cfg_.A))};
    s.app = g ? tape.constant(g->app) : detail::reparam(tape, app_prior, rng, opts.use_means);

    ad::Var lp = ad::gaussian_log_density(s.loc, tr.loc.mean, tr.loc.logvar) +
                 ad::gaussian_log_density(s.scale_raw, sh.mean, sh.logvar) +
                 ad::gaussian_log_density(s.app, app_prior.mean, app_prior.logvar);
    s.log_latent = lp * tape.constant(s.mask);
    s.loc_dist = tr.loc;
    s.scale_dist = sh;
    s.app_dist = app_prior;
    s.log_stop = s.decided ? detail::log_decision(tape, s.continue_logit, s.pres, s.alive_before)
                           : tape.constant(Matrix::Zero(batch, 1));
    alive = p.mask;
    prev = latent_features(cfg_, s.loc, s.scale, s.app);
    state = tr.state;
    traj.steps.push_back(std::move(s));
  }
  return traj;
}

Trajectory GenerativeModel::score(ad::Tape& tape, const Trajectory& traj) const {
  if (traj.K() != cfg_.K) throw ContractViolation("score: trajectory length != K");
  const Eigen::Index batch = traj.batch();
  Trajectory out;
  nn::LstmState state = initial_state(tape, batch);
  ad::Var prev = tape.constant(Matrix::Zero(batch, feature_dim(cfg_)));
  for (const StepSample& q : traj.steps) {
    Transition tr = transition(tape, state, prev);
    StepSample s = q;
    s.continue_logit = tr.continue_logit;
    s.decided = !cfg_.fixed_steps;
    GaussianHead sh = scale_head(tape, tr.state, q.loc);
    ad::Var zeros = tape.constant(Matrix::Zero(batch, cfg_.A));
    ad::Var lp = ad::gaussian_log_density(q.loc, tr.loc.mean, tr.loc.logvar) +
                 ad::gaussian_log_density(q.scale_raw, sh.mean, sh.logvar) +
                 ad::gaussian_log_density(q.app, zeros, zeros);
    s.log_latent = lp * tape.constant(q.mask);
    s.loc_dist = tr.loc;
    s.scale_dist = sh;
    s.app_dist = {zeros, zeros};
    s.log_stop = s.decided ? detail::log_decision(tape, s.continue_logit, q.pres, q.alive_before)
                           : tape.constant(Matrix::Zero(batch, 1));
    prev = latent_features(cfg_, q.loc, q.scale, q.app);
    state = tr.state;
    out.steps.push_back(std::move(s));
  }
  return out;
}

ad::Var GenerativeModel::render_mean(ad::Tape& tape, const Trajectory& traj) const {
  const Eigen::Index batch = traj.batch();
  ad::Var total;
  for (const StepSample& s : traj.steps) {
    if (!(s.mask.array() > 0).any()) continue;
    ad::Var glyph = decode(tape, s.app);
    ad::Var placed = spatial::place(glyph, ad::col(s.loc, 0), ad::col(s.loc, 1), s.scale, cfg_.G, cfg_.S);
    placed = placed * tape.constant(s.mask);
    total = total.valid() ? total + placed : placed;
  }
  if (!total.valid()) total = tape.constant(Matrix::Zero(batch, cfg_.S * cfg_.S));
  if (cfg_.noise == NoiseModel::Bernoulli) {
    total = ad::clamp(total, static_cast<Real>(cfg_.bernoulli_clamp), static_cast<Real>(1 - cfg_.bernoulli_clamp));
  }
  return total;
}

ad::Var GenerativeModel::log_likelihood(ad::Tape& tape, const ad::Var& x, const ad::Var& mean) const {
  if (x.rows() != mean.rows() || x.cols() != mean.cols()) throw ContractViolation("log_likelihood: size mismatch");
  if (cfg_.noise == NoiseModel::Gaussian) {
    const double var = cfg_.sigma * cfg_.sigma;
    const double c = -0.5 * static_cast<double>(x.cols()) * std::log(2 * std::numbers::pi * var);
    return ad::row_sum(ad::square(x - mean)) * static_cast<Real>(-0.5 / var) + static_cast<Real>(c);
  }
  ad::Var one_minus_x = Real(1) - x;
  (void)tape;
  return ad::row_sum(x * ad::log(mean) + one_minus_x * ad::log(Real(1) - mean));
}

RecurrentState GenerativeModel::initial_recurrent_state() const {
  if (fixed()) return {};
  return {Matrix::Zero(1, cfg_.lstm_hidden), Matrix::Zero(1, cfg_.lstm_hidden)};
}

ad::Var GenerativeModel::prev_features(ad::Tape& tape, const ObjectLatent* prev) const {
  if (prev == nullptr) return tape.constant(Matrix::Zero(1, feature_dim(cfg_)));
  if (static_cast<int>(prev->app.size()) != cfg_.A) throw ContractViolation("prior_transition: appearance size mismatch");
  Matrix loc(1, 2);
  loc << static_cast<Real>(prev->x), static_cast<Real>(prev->y);
  Matrix app(1, cfg_.A);
  for (int a = 0; a < cfg_.A; ++a) app(0, a) = static_cast<Real>(prev->app[static_cast<std::size_t>(a)]);
  return latent_features(cfg_, tape.constant(loc), tape.constant(static_cast<Real>(prev->scale)), tape.constant(app));
}

PriorStep GenerativeModel::prior_transition(const RecurrentState& state, const ObjectLatent* prev) const {
  ad::Tape tape;
  nn::LstmState st;
  if (!fixed()) {
    if (state.h.cols() != cfg_.lstm_hidden || state.c.cols() != cfg_.lstm_hidden) {
      throw ContractViolation("prior_transition: state size mismatch");
    }
    st = {tape.constant(state.h), tape.constant(state.c)};
  }
  Transition tr = transition(tape, st, prev_features(tape, prev));
  GaussianHead sh = scale_head(tape, tr.state, tr.loc.mean);
  PriorStep out;
  const Matrix& logit = tr.continue_logit.value();
  require_finite(logit, "prior_transition");
  require_finite(tr.loc.mean.value(), "prior_transition");
  require_finite(tr.loc.logvar.value(), "prior_transition");
  require_finite(sh.mean.value(), "prior_transition");
  require_finite(sh.logvar.value(), "prior_transition");
  out.stop_prob = static_cast<double>(detail::sigmoid_values(logit)(0, 0));
  for (int i = 0; i < 2; ++i) {
    out.loc_mean[static_cast<std::size_t>(i)] = tr.loc.mean.value()(0, i);
    out.loc_logvar[static_cast<std::size_t>(i)] = tr.loc.logvar.value()(0, i);
  }
  out.scale_mean = sh.mean.value()(0, 0);
  out.scale_logvar = sh.logvar.value()(0, 0);
  if (!fixed()) out.next = {tr.state.h.value(), tr.state.c.value()};
  return out;
}

Glyph GenerativeModel::decode_glyph(std::span<const double> app) const {
  if (static_cast<int>(app.size()) != cfg_.A) throw ContractViolation("decode_glyph: appearance size mismatch");
  ad::Tape tape;
  Matrix a(1, cfg_.A);
  for (int i = 0; i < cfg_.A; ++i) a(0, i) = static_cast<Real>(app[static_cast<std::size_t>(i)]);
  Matrix g = decode(tape, tape.constant(a)).value();
  require_finite(g, "decode_glyph");
  return Glyph::from_flat(g, cfg_.G);
}

SceneLatent GenerativeModel::sample_prior_scene(int K, Rng& rng) const {
  if (K != cfg_.K) throw ContractViolation("sample_prior_scene: K differs from the model's step count");
  ad::Tape tape;
  Trajectory traj = sample(tape, 1, rng);
  SceneLatent scene = to_scenes(traj, true).front();
  scene.log_p = scene.log_q;
  scene.log_q = 0.0;
  return scene;
}

double GenerativeModel::log_prior(const SceneLatent& scene, int K) const {
  if (K != cfg_.K) throw ContractViolation("log_prior: K differs from the model's step count");
  std::vector<GivenStep> given = given_from_scene(scene, K, cfg_.A);
  ad::Tape tape;
  Rng unused(0);
  Trajectory traj = sample(tape, 1, unused, {}, &given);
  return static_cast<double>((traj.total_log_stop() + traj.total_log_latent()).scalar());
}

Canvas place_glyph(const Glyph& glyph, const BoundingBox& box, int S) {
  if (S < 1) throw ContractViolation("place_glyph: S must be >= 1");
  ad::Tape tape;
  ad::Var out = spatial::place(tape.constant(glyph.flat()), tape.constant(static_cast<Real>(box.cx)),
                               tape.constant(static_cast<Real>(box.cy)), tape.constant(static_cast<Real>(box.side)),
                               glyph.size(), S);
  return Canvas::from_flat(out.value(), S);
}

Canvas compose_mean(std::span<const Canvas> contributions, NoiseModel noise, int S, double clamp) {
  Canvas out = Canvas::zeros(S);
  for (const Canvas& c : contributions) {
    if (c.size() != S) throw ContractViolation("compose_mean: canvas size mismatch");
    out.pixels += c.pixels;
  }
  if (noise == NoiseModel::Bernoulli) {
    out.pixels = out.pixels.cwiseMax(static_cast<Real>(clamp)).cwiseMin(static_cast<Real>(1 - clamp));
  }
  return out;
}

double log_likelihood(const Canvas& x, const Canvas& mean, NoiseModel noise, double sigma) {
  if (x.size() != mean.size()) throw ContractViolation("log_likelihood: size mismatch");
  double total = 0.0;
  if (noise == NoiseModel::Gaussian) {
    if (!(sigma > 0)) throw ContractViolation("log_likelihood: sigma must be > 0");
    const double c = -0.5 * std::log(2 * std::numbers::pi * sigma * sigma);
    for (Eigen::Index i = 0; i < x.pixels.size(); ++i) {
      const double r = static_cast<double>(x.pixels.data()[i]) - static_cast<double>(mean.pixels.data()[i]);
      total += c - 0.5 * r * r / (sigma * sigma);
    }
    return total;
  }
  for (Eigen::Index i = 0; i < x.pixels.size(); ++i) {
    const double xi = x.pixels.data()[i];
    const double mi = mean.pixels.data()[i];
    if (xi < 0 || xi > 1) throw ContractViolation("log_likelihood: bernoulli targets must lie in [0,1]");
    if (xi > 0) total += xi * std::log(mi);
    if (xi < 1) total += (1 - xi) * std::log(1 - mi);
  }
  return total;
}

}  // namespace asr
