#include "asr/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

#include "asr/errors.hpp"

namespace asr {

double squared_error(const Canvas& x, const Canvas& recon) {
  if (x.size() != recon.size()) throw ContractViolation("squared_error: size mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.pixels.size(); ++i) {
    const double d = static_cast<double>(x.pixels.data()[i]) - static_cast<double>(recon.pixels.data()[i]);
    s += d * d;
  }
  return s;
}

int count_accuracy(int num_inf, int num_gt) { return num_inf == num_gt ? 1 : 0; }

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double h = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = w * h;
  const double area_a = std::max(a.side, 0.0) * std::max(a.side, 0.0);
  const double area_b = std::max(b.side, 0.0) * std::max(b.side, 0.0);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double miou(std::span<const BoundingBox> pred, std::span<const BoundingBox> gt) {
  if (pred.empty() && gt.empty()) return 1.0;
  if (pred.empty() || gt.empty()) return 0.0;
  const std::size_t m = std::max(pred.size(), gt.size());
  // Assign each gt slot a prediction index (or none) via permutations of the
  // padded prediction list.
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const auto p = static_cast<std::size_t>(perm[i]);
      if (p < pred.size()) s += iou(pred[p], gt[i]);
    }
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(m);
}

double miou_assignment(std::span<const BoundingBox> pred, std::span<const BoundingBox> gt) {
  if (pred.empty() && gt.empty()) return 1.0;
  if (pred.empty() || gt.empty()) return 0.0;
  const std::size_t np = pred.size(), ng = gt.size();
  if (np > 20) throw ContractViolation("miou_assignment: too many predictions");
  // dp[mask] = best score with gt[0..popcount(mask)) matched into pred subset mask,
  // where gt items may also stay unmatched.
  const std::size_t full = std::size_t{1} << np;
  std::vector<double> dp(full, -std::numeric_limits<double>::infinity());
  dp[0] = 0.0;
  for (std::size_t i = 0; i < ng; ++i) {
    std::vector<double> next = dp;  // gt i unmatched
    for (std::size_t mask = 0; mask < full; ++mask) {
      if (dp[mask] == -std::numeric_limits<double>::infinity()) continue;
      for (std::size_t p = 0; p < np; ++p) {
        if (mask & (std::size_t{1} << p)) continue;
        const std::size_t nm = mask | (std::size_t{1} << p);
        next[nm] = std::max(next[nm], dp[mask] + iou(pred[p], gt[i]));
      }
    }
    dp = std::move(next);
  }
  return *std::max_element(dp.begin(), dp.end()) / static_cast<double>(std::max(np, ng));
}

double nelbo_estimate(std::size_t items, int samples, const std::function<double(std::size_t, int)>& log_weight) {
  if (samples < 1) throw ContractViolation("nelbo_estimate: samples must be >= 1");
  if (items == 0) throw ContractViolation("nelbo_estimate: no items");
  double total = 0.0;
  for (std::size_t i = 0; i < items; ++i) {
    double s = 0.0;
    for (int k = 0; k < samples; ++k) s += log_weight(i, k);
    total += -s / samples;
  }
  return total / static_cast<double>(items);
}

void EvalReport::aggregate() {
  nelbo = se = acc = miou = 0.0;
  if (rows.empty()) return;
  for (const auto& r : rows) {
    nelbo += r.nelbo;
    se += r.se;
    acc += r.acc;
    miou += r.miou;
  }
  const double n = static_cast<double>(rows.size());
  nelbo /= n;
  se /= n;
  acc /= n;
  miou /= n;
}

void EvalReport::write_csv(std::ostream& out) const {
  char buf[256];
  out << "row,nelbo,se,acc,miou,num_inf,num_gt\n";
  std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f,%.6f,%.6f,,\n", nelbo, se, acc, miou);
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%d,%.6f,%d,%d\n", r.index, r.nelbo, r.se, r.acc, r.miou, r.num_inf,
                  r.num_gt);
    out << buf;
  }
}

std::string EvalReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %-8s %-10s %-8s\n%-10.2f %-8.3f %-10.2f %-8.3f\n", "nELBO", "ACC", "SE", "mIoU",
                nelbo, acc, se, miou);
  return buf;
}

}  // namespace asr
