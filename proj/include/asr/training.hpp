// Stochastic gradient ascent on Rec - KL - r with pathwise gradients for the
// continuous latents and a score-function estimator for stop decisions.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asr/constraints.hpp"
#include "asr/data.hpp"
#include "asr/model.hpp"
#include "asr/nn.hpp"

namespace asr {

/// Batch means of one objective evaluation.
struct ElboBreakdown {
  double rec = 0.0;  // log p(x | z)
  double kl = 0.0;   // log q(z) - log p(z)
  double r = 0.0;    // penalty
  double j = 0.0;    // rec - kl - r
};

enum class NanPolicy { Halt, Skip };
NanPolicy parse_nan_policy(const std::string& s);

struct TrainConfig {
  Variant variant = Variant::AirAsr;
  nn::AdamConfig adam;
  int epochs = 300;
  int batch_size = 64;
  std::uint64_t seed = 0;
  /// Constraint id -> lambda. Ignored unless variant is air-asr.
  std::map<std::string, double> lambda;
  SceneConfig scene;
  double baseline_decay = 0.9;
  double clip_norm = 10.0;
  /// Closed-form Gaussian KL for loc, scale and appearance instead of the
  /// sampled log-ratio. Stop decisions keep the sampled log-ratio.
  bool analytic_kl = false;
  /// Presence pinned to the ground-truth count of each example.
  bool teacher_forcing = false;
  NanPolicy nan_policy = NanPolicy::Halt;
  /// Output directory for log.csv, functionals.csv and checkpoints; empty
  /// disables all file output.
  std::string out_dir;
  /// Keep checkpoint_e<N>.ckpt every this many epochs (0: none).
  /// checkpoint_last.ckpt is always refreshed.
  int checkpoint_every = 0;
  /// Held-out evaluation cadence in epochs (0: never).
  int eval_every = 1;
  int eval_samples = 1;
  /// Record elapsed seconds in the wall_s column (breaks byte-identical logs).
  bool log_wall_clock = false;

  void validate() const;
};

/// Everything one sampled trajectory per datum yields.
struct ElboTerms {
  Trajectory q;                 // posterior sample
  Trajectory p;                 // the same latents scored by the prior
  ad::Var rec;                  // B x 1
  std::vector<ad::Var> kl;      // per step, B x 1
  ad::Var r_datum;              // B x 1
  ad::Var r;                    // 1 x 1
  ElboBreakdown breakdown;
  std::map<std::string, double> functionals;
};

struct ElboOptions {
  const PenaltySpec* penalty = nullptr;
  const SceneConfig* scene = nullptr;
  bool analytic_kl = false;
  std::optional<std::vector<int>> forced_counts;
};

/// Box latents of a posterior trajectory in the layout the constraint
/// functionals expect. count_probs is invalid when presence is not sampled.
LatentBatch latent_batch(const Trajectory& q);

ElboTerms elbo_terms(ad::Tape& tape, const AsrModel& model, const ad::Var& x, Rng& rng, const ElboOptions& opts);

/// sum_t mean(log_prob_t * (downstream_t - baseline_t)) with the advantage
/// held constant. downstream is B x T; rows with alive_t == 0 are ignored
/// when the baseline is updated. The baseline is read before it is updated.
ad::Var score_function_term(const std::vector<ad::Var>& log_prob, const std::vector<Matrix>& alive,
                            const Matrix& downstream, BaselineState& baseline, double decay);

/// mean J' plus the score-function term for every sampled stop decision.
/// Maximize this.
ad::Var surrogate_objective(const ElboTerms& terms, BaselineState& baseline, double decay);

struct StepStats {
  ElboBreakdown breakdown;
  std::map<std::string, double> functionals;
  double grad_norm = 0.0;
  bool skipped = false;
};

struct EpochStats {
  int epoch = 0;
  ElboBreakdown train;  // example-weighted means over the epoch
  std::map<std::string, double> functionals;
  int skipped_steps = 0;
  /// Held-out results. Without evaluation nelbo is the training -(rec - kl)
  /// and acc/miou are NaN.
  double nelbo = 0.0;
  double acc = 0.0;
  double miou = 0.0;
  double wall_s = 0.0;
};

inline constexpr const char* kLogHeader = "epoch,nelbo,rec,kl,penalty,acc,miou,wall_s";

class Trainer {
 public:
  Trainer(AsrModel& model, TrainConfig cfg, TrainingState state = {});

  /// One optimization step on a batch (rows of x are flattened images).
  StepStats step(const Matrix& x, const std::vector<int>& gt_counts, Rng& rng);
  /// One pass over `train` in a seed-determined order; advances the epoch.
  EpochStats run_epoch(const Dataset& train);
  /// Runs epochs until cfg.epochs are complete, evaluating on `heldout`
  /// (may be null) and writing logs and checkpoints to cfg.out_dir.
  std::vector<EpochStats> train(const Dataset& train, const Dataset* heldout);

  const TrainingState& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  const PenaltySpec& penalty() const { return penalty_; }

 private:
  AsrModel& model_;
  TrainConfig cfg_;
  TrainingState state_;
  PenaltySpec penalty_;
  nn::Adam adam_;
};

/// One CSV log line (no newline).
std::string format_log_row(const EpochStats& e);

}  // namespace asr
