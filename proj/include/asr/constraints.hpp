// Structural constraint functionals over posterior samples and the hinge
// penalty R(q) = sum_i lambda_i * max(F_i(q), 0).
//
// Two routes compute the same quantities:
//   * scalar functions over BoundingBox lists / CountDistribution (reference);
//   * batched ad::Var functions over a LatentBatch (used in training).
#pragma once

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "asr/autodiff.hpp"
#include "asr/scene.hpp"

namespace asr {

struct SceneConfig {
  int S = 50;
  double c_min = 15.0;
  double c_max = 25.0;
  double eps = 2.0;
  std::vector<int> allowed_counts{1, 3};
  int K = 3;

  /// Throws ContractViolation on an inconsistent configuration.
  void validate() const;
};

double hinge(double x);

/// Sum over unordered pairs of hinge((s_i + s_j)/2 - max(|dx|, |dy|)).
double f1_pairwise_overlap(std::span<const BoundingBox> boxes);
/// (left, right, top, bottom) boundary violations.
std::array<double, 4> f_containment(std::span<const BoundingBox> boxes, double S);
double f6_scale_band(std::span<const BoundingBox> boxes, double c_min, double c_max);
double f7_scale_similarity(std::span<const BoundingBox> boxes, double eps);

/// Overlap weights lambda_1..lambda_7.
using OverlapWeights = std::array<double, 7>;

/// The seven overlap functionals of one scene.
std::array<double, 7> overlap_functionals(std::span<const BoundingBox> boxes, const SceneConfig& cfg);
/// Batch mean of sum_i lambda_i F_i.
double overlap_regularizer(std::span<const SceneLatent> scenes, const SceneConfig& cfg, const OverlapWeights& lambda);

/// min_{i in L} KL(q_i || q) = -log max_{i in L} q[i] (floored).
double count_match_penalty(const CountDistribution& q, std::span<const int> allowed);
/// KL(uniform over L || batch-mean count distribution), floored.
double count_marginal_penalty(std::span<const CountDistribution> batch, std::span<const int> allowed);
double count_regularizer(std::span<const CountDistribution> batch, std::span<const int> allowed, double lambda_match,
                         double lambda_marginal);

/// Everything a functional may look at for one minibatch.
struct BatchContext {
  std::span<const SceneLatent> scenes;
  std::span<const CountDistribution> counts;
  const SceneConfig* cfg = nullptr;
};

/// One structural functional F_i with its weight.
struct ConstraintTerm {
  std::string id;
  double weight = 0.0;
  std::function<double(const BatchContext&)> evaluate;
};

/// Ids accepted by make_term / PenaltySpec.
const std::vector<std::string>& builtin_term_ids();
bool is_builtin_term(const std::string& id);
ConstraintTerm make_term(const std::string& id, double weight);

/// sum_i lambda_i * hinge(F_i).
double total_penalty(std::span<const ConstraintTerm> terms, const BatchContext& ctx);

// ---------------------------------------------------------------------------
// Batched differentiable route

/// Latents of a minibatch unrolled over K steps. Object t of datum b exists
/// when mask(b, t) == 1.
struct LatentBatch {
  ad::Var x;             // B x K
  ad::Var y;             // B x K
  ad::Var side;          // B x K
  Matrix mask;           // B x K, 0/1
  ad::Var count_probs;   // B x (K+1); may be invalid when counts are fixed
};

namespace diff {
ad::Var f1_pairwise_overlap(const LatentBatch& z);
std::array<ad::Var, 4> f_containment(const LatentBatch& z, double S);
ad::Var f6_scale_band(const LatentBatch& z, double c_min, double c_max);
ad::Var f7_scale_similarity(const LatentBatch& z, double eps);
/// B x 1
ad::Var count_match_penalty(const ad::Var& count_probs, std::span<const int> allowed);
/// 1 x 1
ad::Var count_marginal_penalty(const ad::Var& count_probs, std::span<const int> allowed);
}  // namespace diff

/// Weighted set of built-in terms (id -> lambda), validated at construction.
class PenaltySpec {
 public:
  PenaltySpec() = default;
  explicit PenaltySpec(std::map<std::string, double> weights);

  bool empty() const;
  const std::map<std::string, double>& weights() const { return weights_; }
  bool uses_counts() const;

  struct Result {
    ad::Var total;       // 1 x 1, R(q)
    ad::Var per_datum;   // B x 1 whose mean equals total
    std::map<std::string, double> functionals;  // F_i estimates
  };
  Result evaluate(const LatentBatch& z, const SceneConfig& cfg) const;

 private:
  std::map<std::string, double> weights_;
};

}  // namespace asr
