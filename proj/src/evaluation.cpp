#include "asr/evaluation.hpp"

#include <algorithm>

#include "asr/errors.hpp"

namespace asr {

EvalReport evaluate(const AsrModel& model, const Dataset& data, const EvalOptions& opts,
                    std::vector<Inference>* details) {
  if (opts.samples < 1) throw ContractViolation("evaluate: samples must be >= 1");
  if (opts.batch_size < 1) throw ContractViolation("evaluate: batch_size must be >= 1");
  const ModelConfig& cfg = model.config();
  if (data.S != cfg.S) throw ContractViolation("evaluate: dataset canvas size differs from the model");
  const int K = cfg.K;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, opts.batch_size / opts.samples));

  EvalReport report;
  if (details) details->clear();
  for (std::size_t start = 0, c = 0; start < data.size(); start += chunk, ++c) {
    const std::size_t n = std::min(chunk, data.size() - start);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = start + i;
    const Matrix images = stack_images(data, idx);
    Rng rng = Rng::derive(opts.seed, {c});

    // sampled trajectories: rows i*samples .. i*samples + samples - 1 belong to example i
    Matrix weights;
    std::vector<CountDistribution> counts(n);
    {
      ad::Tape tape;
      Matrix rep(static_cast<Eigen::Index>(n) * opts.samples, images.cols());
      for (std::size_t i = 0; i < n; ++i) {
        rep.middleRows(static_cast<Eigen::Index>(i) * opts.samples, opts.samples) =
            images.row(static_cast<Eigen::Index>(i)).replicate(opts.samples, 1);
      }
      ad::Var x = tape.constant(std::move(rep));
      Trajectory q = model.rec().sample(tape, x, rng);
      Trajectory p = model.gen().score(tape, q);
      ad::Var rec = model.gen().log_likelihood(tape, x, model.gen().render_mean(tape, q));
      weights = rec.value();
      for (std::size_t t = 0; t < q.steps.size(); ++t) {
        weights -= q.steps[t].log_stop.value() + q.steps[t].log_latent.value();
        weights += p.steps[t].log_stop.value() + p.steps[t].log_latent.value();
      }
      ad::Var cp = q.continue_probs();
      const Matrix probs = cp.valid() ? induced_count_distribution(cp).value() : Matrix();
      for (std::size_t i = 0; i < n; ++i) {
        counts[i].probs.assign(static_cast<std::size_t>(K + 1), 0.0);
        if (!cp.valid()) {
          counts[i].probs.back() = 1.0;
          continue;
        }
        for (int s = 0; s < opts.samples; ++s) {
          const Eigen::Index row = static_cast<Eigen::Index>(i) * opts.samples + s;
          for (int k = 0; k <= K; ++k) counts[i].probs[static_cast<std::size_t>(k)] += probs(row, k) / opts.samples;
        }
      }
    }
    if (!weights.allFinite()) throw NumericError("evaluate: non-finite ELBO");

    std::vector<int> num_inf(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& pr = counts[i].probs;
      num_inf[i] = static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());
    }

    // posterior means with presence pinned to the inferred count
    ad::Tape tape;
    SampleOptions mean_opts;
    mean_opts.use_means = true;
    mean_opts.forced_counts = num_inf;
    Rng unused = Rng::derive(opts.seed, {c, 1});
    Trajectory qm = model.rec().sample(tape, tape.constant(images), unused, mean_opts);
    const Matrix recon = model.gen().render_mean(tape, qm).value();

    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Index b = static_cast<Eigen::Index>(i);
      const DatasetExample& ex = data.examples[start + i];
      Inference inf;
      inf.counts = counts[i];
      inf.num_inf = num_inf[i];
      for (const StepSample& s : qm.steps) {
        if (s.mask(b, 0) > 0.5) {
          inf.boxes.push_back({static_cast<double>(s.loc.value()(b, 0)), static_cast<double>(s.loc.value()(b, 1)),
                               static_cast<double>(s.scale.value()(b, 0))});
        }
      }
      inf.recon = Canvas::from_flat(recon.row(b), cfg.S);

      EvalRow row;
      row.index = start + i;
      row.nelbo = nelbo_estimate(1, opts.samples, [&](std::size_t, int s) {
        return static_cast<double>(weights(b * opts.samples + s, 0));
      });
      row.se = squared_error(ex.image, inf.recon);
      row.num_inf = inf.num_inf;
      row.num_gt = ex.gt_count;
      row.acc = count_accuracy(row.num_inf, row.num_gt);
      row.miou = miou(inf.boxes, ex.gt_boxes);
      report.rows.push_back(row);
      if (details) details->push_back(std::move(inf));
    }
  }
  report.aggregate();
  return report;
}

}  // namespace asr
