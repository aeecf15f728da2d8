#include "asr/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asr/config.hpp"
#include "asr/errors.hpp"
#include "asr/evaluation.hpp"

namespace asr {

namespace {

constexpr std::uint64_t kTagTrain = 1;
constexpr std::uint64_t kTagShuffle = 2;
constexpr std::uint64_t kTagEval = 3;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << text;
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + ": " + ec.message());
}

/// Keeps the header and rows whose first field is an epoch <= `epoch`.
std::string kept_rows(const std::string& path, const std::string& header, int epoch) {
  std::string out = header + "\n";
  const auto lines = read_lines(path);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto comma = lines[i].find(',');
    if (comma == std::string::npos) continue;
    int e = 0;
    try {
      e = parse_int(lines[i].substr(0, comma), "log epoch");
    } catch (const ConfigError&) {
      continue;
    }
    if (e <= epoch) out += lines[i] + "\n";
  }
  return out;
}

bool grads_finite(const nn::ParamStore& store) {
  for (const ad::Parameter* p : store.all()) {
    if (p->grad.size() && !p->grad.allFinite()) return false;
  }
  return true;
}

}  // namespace

NanPolicy parse_nan_policy(const std::string& s) {
  if (s == "halt") return NanPolicy::Halt;
  if (s == "skip") return NanPolicy::Skip;
  throw ConfigError("unknown nan policy '" + s + "' (expected halt or skip)");
}

void TrainConfig::validate() const {
  if (!(adam.lr > 0)) throw ConfigError("train.lr must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(baseline_decay >= 0 && baseline_decay < 1)) throw ConfigError("train.baseline_decay must lie in [0, 1)");
  if (!(clip_norm > 0)) throw ConfigError("train.clip_norm must be > 0");
  if (checkpoint_every < 0 || eval_every < 0) throw ConfigError("checkpoint/eval cadence must be >= 0");
  if (eval_samples < 1) throw ConfigError("eval.samples must be >= 1");
  for (const auto& [id, w] : lambda) {
    if (!is_builtin_term(id)) throw ConfigError("unknown constraint id: " + id);
    if (!(w >= 0)) throw ConfigError("constraint weight must be nonnegative: " + id);
  }
  try {
    scene.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

LatentBatch latent_batch(const Trajectory& q) {
  std::vector<ad::Var> xs, ys, sides;
  for (const StepSample& s : q.steps) {
    xs.push_back(ad::col(s.loc, 0));
    ys.push_back(ad::col(s.loc, 1));
    sides.push_back(s.scale);
  }
  LatentBatch z;
  z.x = ad::concat_cols(xs);
  z.y = ad::concat_cols(ys);
  z.side = ad::concat_cols(sides);
  z.mask = q.mask_matrix();
  ad::Var probs = q.continue_probs();
  if (probs.valid()) z.count_probs = induced_count_distribution(probs);
  return z;
}

ElboTerms elbo_terms(ad::Tape& tape, const AsrModel& model, const ad::Var& x, Rng& rng, const ElboOptions& opts) {
  if (!model.store().all_finite()) throw NumericError("elbo_terms: non-finite parameters");
  ElboTerms t;
  SampleOptions so;
  so.forced_counts = opts.forced_counts;
  t.q = model.rec().sample(tape, x, rng, so);
  t.p = model.gen().score(tape, t.q);
  t.rec = model.gen().log_likelihood(tape, x, model.gen().render_mean(tape, t.q));

  const Eigen::Index B = x.rows();
  ad::Var kl_total = tape.constant(Matrix::Zero(B, 1));
  for (std::size_t k = 0; k < t.q.steps.size(); ++k) {
    const StepSample& qs = t.q.steps[k];
    const StepSample& ps = t.p.steps[k];
    ad::Var kl;
    if (opts.analytic_kl) {
      ad::Var latent = gaussian_kl(qs.loc_dist, ps.loc_dist) + gaussian_kl(qs.scale_dist, ps.scale_dist) +
                       gaussian_kl(qs.app_dist, ps.app_dist);
      kl = latent * tape.constant(qs.mask) + (qs.log_stop - ps.log_stop);
    } else {
      kl = (qs.log_stop + qs.log_latent) - (ps.log_stop + ps.log_latent);
    }
    t.kl.push_back(kl);
    kl_total = kl_total + kl;
  }

  if (opts.penalty != nullptr && !opts.penalty->empty()) {
    if (opts.scene == nullptr) throw ContractViolation("elbo_terms: penalty requires a scene configuration");
    PenaltySpec::Result res = opts.penalty->evaluate(latent_batch(t.q), *opts.scene);
    t.r_datum = res.per_datum;
    t.r = res.total;
    t.functionals = std::move(res.functionals);
  } else {
    t.r_datum = tape.constant(Matrix::Zero(B, 1));
    t.r = tape.constant(Matrix::Zero(1, 1));
  }

  t.breakdown.rec = static_cast<double>(t.rec.value().mean());
  t.breakdown.kl = static_cast<double>(kl_total.value().mean());
  t.breakdown.r = static_cast<double>(t.r.scalar());
  t.breakdown.j = t.breakdown.rec - t.breakdown.kl - t.breakdown.r;
  if (!std::isfinite(t.breakdown.j)) throw NumericError("elbo_terms: non-finite objective");
  return t;
}

ad::Var score_function_term(const std::vector<ad::Var>& log_prob, const std::vector<Matrix>& alive,
                            const Matrix& downstream, BaselineState& baseline, double decay) {
  if (log_prob.empty()) throw ContractViolation("score_function_term: no steps");
  if (alive.size() != log_prob.size() || downstream.cols() != static_cast<Eigen::Index>(log_prob.size())) {
    throw ContractViolation("score_function_term: step count mismatch");
  }
  ad::Tape& tape = *log_prob.front().tape();
  const std::size_t T = log_prob.size();
  const Eigen::Index B = downstream.rows();
  if (baseline.values.size() != T) {
    baseline.values.assign(T, 0.0);
    baseline.ready = false;
  }
  // per-step batch means over alive rows
  std::vector<double> means(T, 0.0);
  std::vector<bool> has(T, false);
  for (std::size_t t = 0; t < T; ++t) {
    double sum = 0;
    int n = 0;
    for (Eigen::Index b = 0; b < B; ++b) {
      if (alive[t](b, 0) > 0.5) {
        sum += static_cast<double>(downstream(b, static_cast<Eigen::Index>(t)));
        ++n;
      }
    }
    if (n > 0) {
      means[t] = sum / n;
      has[t] = true;
    }
  }
  if (!baseline.ready) {
    for (std::size_t t = 0; t < T; ++t) baseline.values[t] = has[t] ? means[t] : 0.0;
    baseline.ready = true;
  }
  ad::Var acc = tape.constant(Matrix::Zero(1, 1));
  for (std::size_t t = 0; t < T; ++t) {
    Matrix adv = (downstream.col(static_cast<Eigen::Index>(t)).array() - static_cast<Real>(baseline.values[t])).matrix();
    adv = adv.cwiseProduct(alive[t]);
    acc = acc + ad::mean(log_prob[t] * tape.constant(std::move(adv)));
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (has[t]) baseline.values[t] = decay * baseline.values[t] + (1 - decay) * means[t];
  }
  return acc;
}

ad::Var surrogate_objective(const ElboTerms& terms, BaselineState& baseline, double decay) {
  ad::Var j = terms.rec - terms.r_datum;
  for (const ad::Var& kl : terms.kl) j = j - kl;
  ad::Var objective = ad::mean(j);
  if (terms.q.steps.empty() || !terms.q.steps.front().decided) return objective;

  const std::size_t T = terms.q.steps.size();
  const Eigen::Index B = terms.rec.rows();
  Matrix downstream(B, static_cast<Eigen::Index>(T));
  Matrix tail = terms.rec.value() - terms.r_datum.value();
  for (std::size_t s = 0; s < T; ++s) tail -= terms.kl[s].value();
  // tail now holds J'; peel off KL terms before each step
  for (std::size_t t = 0; t < T; ++t) {
    downstream.col(static_cast<Eigen::Index>(t)) = tail;
    tail += terms.kl[t].value();
  }
  std::vector<ad::Var> log_prob;
  std::vector<Matrix> alive;
  for (const StepSample& s : terms.q.steps) {
    log_prob.push_back(s.log_stop);
    alive.push_back(s.alive_before);
  }
  return objective + score_function_term(log_prob, alive, downstream, baseline, decay);
}

Trainer::Trainer(AsrModel& model, TrainConfig cfg, TrainingState state)
    : model_(model), cfg_(std::move(cfg)), state_(std::move(state)), adam_(cfg_.adam) {
  cfg_.validate();
  const bool fixed_prior = model_.config().prior == PriorKind::Fixed;
  if ((cfg_.variant == Variant::Air) != fixed_prior) {
    throw ConfigError("variant " + to_string(cfg_.variant) + " requires model.prior = " +
                      (cfg_.variant == Variant::Air ? "fixed" : "learned"));
  }
  if (cfg_.scene.K != model_.config().K || cfg_.scene.S != model_.config().S) {
    throw ConfigError("scene.K/scene.S must match model.K/model.S");
  }
  if (cfg_.variant == Variant::AirAsr) penalty_ = PenaltySpec(cfg_.lambda);
  adam_.set_steps(state_.adam_steps);
}

StepStats Trainer::step(const Matrix& x, const std::vector<int>& gt_counts, Rng& rng) {
  StepStats out;
  nn::ParamStore& store = model_.store();
  store.zero_grad();
  ad::Tape tape;
  ElboOptions opts;
  opts.penalty = &penalty_;
  opts.scene = &cfg_.scene;
  opts.analytic_kl = cfg_.analytic_kl;
  if (cfg_.teacher_forcing) opts.forced_counts = gt_counts;

  BaselineState next_baseline = state_.baseline;
  bool ok = true;
  try {
    ElboTerms terms = elbo_terms(tape, model_, tape.constant(x), rng, opts);
    out.breakdown = terms.breakdown;
    out.functionals = terms.functionals;
    ad::Var loss = -surrogate_objective(terms, next_baseline, cfg_.baseline_decay);
    if (!std::isfinite(static_cast<double>(loss.scalar()))) throw NumericError("non-finite loss");
    tape.backward(loss);
    if (!grads_finite(store)) throw NumericError("non-finite gradient");
  } catch (const NumericError& e) {
    if (cfg_.nan_policy == NanPolicy::Halt) {
      throw NumericError("epoch " + std::to_string(state_.epoch + 1) + ", step " +
                         std::to_string(state_.adam_steps + 1) + ": " + e.what());
    }
    ok = false;
  }
  if (!ok) {
    store.zero_grad();
    out.skipped = true;
    return out;
  }
  out.grad_norm = store.clip_grad_norm(cfg_.clip_norm);
  adam_.step(store);
  state_.adam_steps = adam_.steps();
  state_.baseline = std::move(next_baseline);
  if (!store.all_finite()) throw NumericError("parameters became non-finite after step " +
                                              std::to_string(state_.adam_steps));
  return out;
}

EpochStats Trainer::run_epoch(const Dataset& train) {
  if (train.size() == 0) throw ContractViolation("train: empty dataset");
  if (train.S != model_.config().S) throw ContractViolation("train: dataset canvas size differs from the model");
  const int epoch = state_.epoch + 1;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle = Rng::derive(cfg_.seed, {static_cast<std::uint64_t>(epoch), kTagShuffle});
  std::shuffle(order.begin(), order.end(), shuffle.engine());

  EpochStats stats;
  stats.epoch = epoch;
  double weight = 0;
  std::map<std::string, double> fsum;
  const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0, batch = 0; start < order.size(); start += bs, ++batch) {
    std::span<const std::size_t> idx(order.data() + start, std::min(bs, order.size() - start));
    Matrix x = stack_images(train, idx);
    std::vector<int> counts;
    for (std::size_t i : idx) counts.push_back(train.examples[i].gt_count);
    Rng rng = Rng::derive(cfg_.seed, {static_cast<std::uint64_t>(epoch), batch, kTagTrain});
    StepStats s = step(x, counts, rng);
    if (s.skipped) {
      ++stats.skipped_steps;
      continue;
    }
    const double w = static_cast<double>(idx.size());
    weight += w;
    stats.train.rec += w * s.breakdown.rec;
    stats.train.kl += w * s.breakdown.kl;
    stats.train.r += w * s.breakdown.r;
    for (const auto& [k, v] : s.functionals) fsum[k] += w * v;
  }
  if (weight > 0) {
    stats.train.rec /= weight;
    stats.train.kl /= weight;
    stats.train.r /= weight;
    for (const auto& [k, v] : fsum) stats.functionals[k] = v / weight;
  }
  stats.train.j = stats.train.rec - stats.train.kl - stats.train.r;
  stats.nelbo = -(stats.train.rec - stats.train.kl);
  stats.acc = stats.miou = std::nan("");
  state_.epoch = epoch;
  return stats;
}

std::string format_log_row(const EpochStats& e) {
  return std::to_string(e.epoch) + "," + fmt(e.nelbo) + "," + fmt(e.train.rec) + "," + fmt(e.train.kl) + "," +
         fmt(e.train.r) + "," + fmt(e.acc) + "," + fmt(e.miou) + "," + fmt(e.wall_s);
}

std::vector<EpochStats> Trainer::train(const Dataset& train, const Dataset* heldout) {
  namespace fs = std::filesystem;
  const bool files = !cfg_.out_dir.empty();
  const std::string log_path = files ? (fs::path(cfg_.out_dir) / "log.csv").string() : "";
  const std::string fn_path = files ? (fs::path(cfg_.out_dir) / "functionals.csv").string() : "";
  std::vector<std::string> fn_ids;
  for (const auto& [id, w] : penalty_.weights()) {
    if (w > 0) fn_ids.push_back(id);
  }
  std::string fn_header = "epoch";
  for (const auto& id : fn_ids) fn_header += "," + id;
  std::string log_text, fn_text;
  if (files) {
    std::error_code ec;
    fs::create_directories(cfg_.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg_.out_dir + ": " + ec.message());
    log_text = kept_rows(log_path, kLogHeader, state_.epoch);
    fn_text = kept_rows(fn_path, fn_header, state_.epoch);
  }

  std::vector<EpochStats> out;
  const auto t0 = std::chrono::steady_clock::now();
  while (state_.epoch < cfg_.epochs) {
    EpochStats e = run_epoch(train);
    if (heldout != nullptr && heldout->size() > 0 && cfg_.eval_every > 0 &&
        (e.epoch % cfg_.eval_every == 0 || e.epoch == cfg_.epochs)) {
      EvalOptions eo;
      eo.samples = cfg_.eval_samples;
      eo.batch_size = cfg_.batch_size;
      eo.seed = Rng::derive(cfg_.seed, {static_cast<std::uint64_t>(e.epoch), kTagEval}).next();
      EvalReport rep = evaluate(model_, *heldout, eo);
      e.nelbo = rep.nelbo;
      e.acc = rep.acc;
      e.miou = rep.miou;
    }
    e.wall_s = cfg_.log_wall_clock
                   ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                   : 0.0;
    if (files) {
      log_text += format_log_row(e) + "\n";
      std::string row = std::to_string(e.epoch);
      for (const auto& id : fn_ids) {
        auto it = e.functionals.find(id);
        row += "," + fmt(it == e.functionals.end() ? 0.0 : it->second);
      }
      fn_text += row + "\n";
      write_text(log_path, log_text);
      write_text(fn_path, fn_text);
      save_checkpoint((fs::path(cfg_.out_dir) / "checkpoint_last.ckpt").string(), model_, state_);
      if (cfg_.checkpoint_every > 0 && e.epoch % cfg_.checkpoint_every == 0) {
        save_checkpoint((fs::path(cfg_.out_dir) / ("checkpoint_e" + std::to_string(e.epoch) + ".ckpt")).string(),
                        model_, state_);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace asr
