// Evaluation metrics: squared error, count accuracy, IoU, permutation-matched
// mIoU, and the nELBO estimator.
#pragma once

#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "asr/scene.hpp"
#include "asr/trajectory.hpp"

namespace asr {

/// Sum over pixels of (x - recon)^2.
double squared_error(const Canvas& x, const Canvas& recon);
int count_accuracy(int num_inf, int num_gt);
double iou(const BoundingBox& a, const BoundingBox& b);

/// max over matchings of sum IoU / max(|pred|, |gt|), by enumerating
/// permutations. Both empty -> 1; exactly one empty -> 0.
double miou(std::span<const BoundingBox> pred, std::span<const BoundingBox> gt);
/// Same value via a bitmask dynamic program over assignments.
double miou_assignment(std::span<const BoundingBox> pred, std::span<const BoundingBox> gt);

/// Mean over items of -(1/samples) sum_s log_weight(item, s), where
/// log_weight is a single-sample ELBO term log p(x, z) - log q(z | x).
double nelbo_estimate(std::size_t items, int samples, const std::function<double(std::size_t, int)>& log_weight);

struct EvalRow {
  std::size_t index = 0;
  double nelbo = 0.0;
  double se = 0.0;
  int acc = 0;
  double miou = 0.0;
  int num_inf = 0;
  int num_gt = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double nelbo = 0.0;
  double se = 0.0;
  double acc = 0.0;
  double miou = 0.0;

  /// Recomputes the aggregates as means of the rows.
  void aggregate();
  /// Aggregate row first, then one row per example.
  void write_csv(std::ostream& out) const;
  /// nELBO, ACC, SE, mIoU block.
  std::string summary() const;
};

}  // namespace asr
