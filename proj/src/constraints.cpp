#include "asr/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "asr/errors.hpp"

namespace asr {

void SceneConfig::validate() const {
  if (S <= 0) throw ContractViolation("scene config: S must be positive");
  if (!(c_min > 0 && c_min <= c_max && c_max <= S)) {
    throw ContractViolation("scene config: need 0 < c_min <= c_max <= S");
  }
  if (!(eps >= 0)) throw ContractViolation("scene config: eps must be >= 0");
  if (K < 1) throw ContractViolation("scene config: K must be >= 1");
  if (allowed_counts.empty()) throw ContractViolation("scene config: allowed count set is empty");
  std::set<int> uniq(allowed_counts.begin(), allowed_counts.end());
  if (uniq.size() != allowed_counts.size()) throw ContractViolation("scene config: duplicate allowed count");
  for (int c : allowed_counts) {
    if (c < 0 || c > K) throw ContractViolation("scene config: allowed count outside 0..K");
  }
  if (static_cast<int>(uniq.size()) == K + 1) {
    throw ContractViolation("scene config: allowed counts must be a proper subset of 0..K");
  }
}

double hinge(double x) { return x > 0.0 ? x : 0.0; }

double f1_pairwise_overlap(std::span<const BoundingBox> boxes) {
  double total = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const double sep = std::max(std::abs(boxes[i].cx - boxes[j].cx), std::abs(boxes[i].cy - boxes[j].cy));
      total += hinge((boxes[i].side + boxes[j].side) / 2 - sep);
    }
  }
  return total;
}

std::array<double, 4> f_containment(std::span<const BoundingBox> boxes, double S) {
  std::array<double, 4> f{0, 0, 0, 0};
  for (const auto& b : boxes) {
    f[0] += hinge(b.side / 2 - b.cx);
    f[1] += hinge(b.cx + b.side / 2 - S);
    f[2] += hinge(b.side / 2 - b.cy);
    f[3] += hinge(b.cy + b.side / 2 - S);
  }
  return f;
}

double f6_scale_band(std::span<const BoundingBox> boxes, double c_min, double c_max) {
  double total = 0.0;
  for (const auto& b : boxes) total += hinge(c_min - b.side) + hinge(b.side - c_max);
  return total;
}

double f7_scale_similarity(std::span<const BoundingBox> boxes, double eps) {
  double total = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) total += hinge(std::abs(boxes[i].side - boxes[j].side) - eps);
  }
  return total;
}

std::array<double, 7> overlap_functionals(std::span<const BoundingBox> boxes, const SceneConfig& cfg) {
  const auto c = f_containment(boxes, cfg.S);
  return {f1_pairwise_overlap(boxes), c[0], c[1], c[2], c[3], f6_scale_band(boxes, cfg.c_min, cfg.c_max),
          f7_scale_similarity(boxes, cfg.eps)};
}

double overlap_regularizer(std::span<const SceneLatent> scenes, const SceneConfig& cfg, const OverlapWeights& lambda) {
  for (double l : lambda) {
    if (!(l >= 0)) throw ContractViolation("overlap_regularizer: weights must be nonnegative");
  }
  if (scenes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : scenes) {
    const auto boxes = boxes_of(s);
    const auto f = overlap_functionals(boxes, cfg);
    for (std::size_t i = 0; i < f.size(); ++i) total += lambda[i] * f[i];
  }
  return total / static_cast<double>(scenes.size());
}

double count_match_penalty(const CountDistribution& q, std::span<const int> allowed) {
  if (allowed.empty()) throw ContractViolation("count_match_penalty: empty allowed set");
  double best = 0.0;
  for (int i : allowed) {
    if (i < 0 || i > q.max_count()) throw ContractViolation("count_match_penalty: allowed count out of range");
    best = std::max(best, q[i]);
  }
  return -std::log(std::max(best, kProbFloor));
}

double count_marginal_penalty(std::span<const CountDistribution> batch, std::span<const int> allowed) {
  if (batch.empty()) throw ContractViolation("count_marginal_penalty: empty batch");
  if (allowed.empty()) throw ContractViolation("count_marginal_penalty: empty allowed set");
  const std::size_t width = batch.front().probs.size();
  std::vector<double> avg(width, 0.0);
  for (const auto& q : batch) {
    if (q.probs.size() != width) throw ContractViolation("count_marginal_penalty: ragged batch");
    for (std::size_t i = 0; i < width; ++i) avg[i] += q.probs[i];
  }
  for (double& a : avg) a /= static_cast<double>(batch.size());
  const double u = 1.0 / static_cast<double>(allowed.size());
  double kl = 0.0;
  for (int i : allowed) {
    if (i < 0 || static_cast<std::size_t>(i) >= width) {
      throw ContractViolation("count_marginal_penalty: allowed count out of range");
    }
    kl += u * std::log(u / std::max(avg[static_cast<std::size_t>(i)], kProbFloor));
  }
  return kl;
}

double count_regularizer(std::span<const CountDistribution> batch, std::span<const int> allowed, double lambda_match,
                         double lambda_marginal) {
  if (batch.empty()) throw ContractViolation("count_regularizer: empty batch");
  double match = 0.0;
  for (const auto& q : batch) match += count_match_penalty(q, allowed);
  match /= static_cast<double>(batch.size());
  return lambda_match * match + lambda_marginal * count_marginal_penalty(batch, allowed);
}

namespace {

const std::vector<std::string> kTermIds = {"count_match",  "count_marginal", "overlap",    "inside_left",
                                           "inside_right", "inside_top",     "inside_bottom", "scale_band",
                                           "scale_similarity"};

double mean_over_scenes(const BatchContext& ctx, const std::function<double(std::span<const BoundingBox>)>& f) {
  if (ctx.scenes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : ctx.scenes) total += f(boxes_of(s));
  return total / static_cast<double>(ctx.scenes.size());
}

}  // namespace

const std::vector<std::string>& builtin_term_ids() { return kTermIds; }

bool is_builtin_term(const std::string& id) {
  return std::find(kTermIds.begin(), kTermIds.end(), id) != kTermIds.end();
}

ConstraintTerm make_term(const std::string& id, double weight) {
  if (!is_builtin_term(id)) throw ContractViolation("unknown constraint id: " + id);
  if (!(weight >= 0)) throw ContractViolation("constraint weight must be nonnegative: " + id);
  ConstraintTerm t{id, weight, nullptr};
  if (id == "count_match") {
    t.evaluate = [](const BatchContext& ctx) {
      if (ctx.counts.empty()) return 0.0;
      double m = 0.0;
      for (const auto& q : ctx.counts) m += count_match_penalty(q, ctx.cfg->allowed_counts);
      return m / static_cast<double>(ctx.counts.size());
    };
  } else if (id == "count_marginal") {
    t.evaluate = [](const BatchContext& ctx) {
      return ctx.counts.empty() ? 0.0 : count_marginal_penalty(ctx.counts, ctx.cfg->allowed_counts);
    };
  } else if (id == "overlap") {
    t.evaluate = [](const BatchContext& ctx) {
      return mean_over_scenes(ctx, [](auto b) { return f1_pairwise_overlap(b); });
    };
  } else if (id == "scale_band") {
    t.evaluate = [](const BatchContext& ctx) {
      return mean_over_scenes(ctx, [&](auto b) { return f6_scale_band(b, ctx.cfg->c_min, ctx.cfg->c_max); });
    };
  } else if (id == "scale_similarity") {
    t.evaluate = [](const BatchContext& ctx) {
      return mean_over_scenes(ctx, [&](auto b) { return f7_scale_similarity(b, ctx.cfg->eps); });
    };
  } else {
    const std::size_t k = id == "inside_left" ? 0 : id == "inside_right" ? 1 : id == "inside_top" ? 2 : 3;
    t.evaluate = [k](const BatchContext& ctx) {
      return mean_over_scenes(ctx, [&](auto b) { return f_containment(b, ctx.cfg->S)[k]; });
    };
  }
  return t;
}

double total_penalty(std::span<const ConstraintTerm> terms, const BatchContext& ctx) {
  double r = 0.0;
  for (const auto& t : terms) {
    if (!(t.weight >= 0)) throw ContractViolation("total_penalty: negative weight for " + t.id);
    if (t.weight == 0.0) continue;
    r += t.weight * hinge(t.evaluate(ctx));
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace diff {

ad::Var f1_pairwise_overlap(const LatentBatch& z) {
  ad::Tape& tape = *z.x.tape();
  const Eigen::Index K = z.x.cols();
  ad::Var total = tape.constant(Matrix::Zero(z.x.rows(), 1));
  for (Eigen::Index s = 0; s < K; ++s) {
    for (Eigen::Index t = s + 1; t < K; ++t) {
      Matrix pair = z.mask.col(s).cwiseProduct(z.mask.col(t));
      if (pair.isZero()) continue;
      ad::Var sep = ad::maximum(ad::abs(ad::col(z.x, s) - ad::col(z.x, t)), ad::abs(ad::col(z.y, s) - ad::col(z.y, t)));
      ad::Var half = (ad::col(z.side, s) + ad::col(z.side, t)) * Real(0.5);
      total = total + ad::relu(half - sep) * tape.constant(pair);
    }
  }
  return total;
}

std::array<ad::Var, 4> f_containment(const LatentBatch& z, double S) {
  ad::Tape& tape = *z.x.tape();
  ad::Var m = tape.constant(z.mask);
  ad::Var half = z.side * Real(0.5);
  const Real s = static_cast<Real>(S);
  return {ad::row_sum(ad::relu(half - z.x) * m), ad::row_sum(ad::relu(z.x + half - s) * m),
          ad::row_sum(ad::relu(half - z.y) * m), ad::row_sum(ad::relu(z.y + half - s) * m)};
}

ad::Var f6_scale_band(const LatentBatch& z, double c_min, double c_max) {
  ad::Tape& tape = *z.x.tape();
  ad::Var m = tape.constant(z.mask);
  ad::Var lo = ad::relu(static_cast<Real>(c_min) - z.side);
  ad::Var hi = ad::relu(z.side - static_cast<Real>(c_max));
  return ad::row_sum((lo + hi) * m);
}

ad::Var f7_scale_similarity(const LatentBatch& z, double eps) {
  ad::Tape& tape = *z.x.tape();
  const Eigen::Index K = z.x.cols();
  ad::Var total = tape.constant(Matrix::Zero(z.x.rows(), 1));
  for (Eigen::Index s = 0; s < K; ++s) {
    for (Eigen::Index t = s + 1; t < K; ++t) {
      Matrix pair = z.mask.col(s).cwiseProduct(z.mask.col(t));
      if (pair.isZero()) continue;
      ad::Var d = ad::abs(ad::col(z.side, s) - ad::col(z.side, t)) - static_cast<Real>(eps);
      total = total + ad::relu(d) * tape.constant(pair);
    }
  }
  return total;
}

ad::Var count_match_penalty(const ad::Var& count_probs, std::span<const int> allowed) {
  if (allowed.empty()) throw ContractViolation("count_match_penalty: empty allowed set");
  std::vector<ad::Var> cols;
  for (int i : allowed) {
    if (i < 0 || i >= count_probs.cols()) throw ContractViolation("count_match_penalty: allowed count out of range");
    cols.push_back(ad::col(count_probs, i));
  }
  ad::Var best = ad::row_max(ad::concat_cols(cols));
  return -ad::log(ad::clamp(best, static_cast<Real>(kProbFloor), Real(1)));
}

ad::Var count_marginal_penalty(const ad::Var& count_probs, std::span<const int> allowed) {
  if (allowed.empty()) throw ContractViolation("count_marginal_penalty: empty allowed set");
  ad::Var avg = ad::col_mean(count_probs);
  const double u = 1.0 / static_cast<double>(allowed.size());
  ad::Tape& tape = *count_probs.tape();
  ad::Var kl = tape.constant(Matrix::Zero(1, 1));
  for (int i : allowed) {
    if (i < 0 || i >= count_probs.cols()) throw ContractViolation("count_marginal_penalty: allowed count out of range");
    ad::Var qi = ad::clamp(ad::col(avg, i), static_cast<Real>(kProbFloor), Real(1));
    kl = kl + (static_cast<Real>(std::log(u)) - ad::log(qi)) * static_cast<Real>(u);
  }
  return kl;
}

}  // namespace diff

PenaltySpec::PenaltySpec(std::map<std::string, double> weights) : weights_(std::move(weights)) {
  for (const auto& [id, w] : weights_) {
    if (!is_builtin_term(id)) throw ContractViolation("unknown constraint id: " + id);
    if (!(w >= 0)) throw ContractViolation("constraint weight must be nonnegative: " + id);
  }
}

bool PenaltySpec::empty() const {
  for (const auto& [id, w] : weights_) {
    if (w > 0) return false;
  }
  return true;
}

bool PenaltySpec::uses_counts() const {
  for (const auto& [id, w] : weights_) {
    if (w > 0 && (id == "count_match" || id == "count_marginal")) return true;
  }
  return false;
}

PenaltySpec::Result PenaltySpec::evaluate(const LatentBatch& z, const SceneConfig& cfg) const {
  ad::Tape& tape = *z.x.tape();
  const Eigen::Index B = z.x.rows();
  Result res;
  res.total = tape.constant(Matrix::Zero(1, 1));
  res.per_datum = tape.constant(Matrix::Zero(B, 1));
  std::array<ad::Var, 4> inside;
  bool inside_ready = false;
  for (const auto& [id, w] : weights_) {
    if (w <= 0) continue;
    ad::Var f;
    if (id == "count_match" || id == "count_marginal") {
      if (!z.count_probs.valid()) continue;  // counts are fixed; the term is identically zero
      f = id == "count_match" ? diff::count_match_penalty(z.count_probs, cfg.allowed_counts)
                              : diff::count_marginal_penalty(z.count_probs, cfg.allowed_counts);
    } else if (id == "overlap") {
      f = diff::f1_pairwise_overlap(z);
    } else if (id == "scale_band") {
      f = diff::f6_scale_band(z, cfg.c_min, cfg.c_max);
    } else if (id == "scale_similarity") {
      f = diff::f7_scale_similarity(z, cfg.eps);
    } else {
      if (!inside_ready) {
        inside = diff::f_containment(z, cfg.S);
        inside_ready = true;
      }
      f = inside[id == "inside_left" ? 0 : id == "inside_right" ? 1 : id == "inside_top" ? 2 : 3];
    }
    ad::Var F = ad::mean(f);
    res.functionals[id] = static_cast<double>(F.scalar());
    const Real lam = static_cast<Real>(w);
    res.total = res.total + ad::relu(F) * lam;
    if (F.scalar() >= 0) {
      // broadcast the batch-level marginal term to every datum
      res.per_datum = res.per_datum + f * lam;
    }
  }
  return res;
}

}  // namespace asr
