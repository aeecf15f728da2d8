// Independent reference computations shared by the unit tests and the
// acceptance runner.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "asr/random.hpp"
#include "asr/scene.hpp"

namespace asr::testing {

/// Intersection over union by painting both boxes on a grid of the given pitch.
inline double raster_iou(const BoundingBox& a, const BoundingBox& b, double pitch) {
  const double x0 = std::min(a.left(), b.left()), x1 = std::max(a.right(), b.right());
  const double y0 = std::min(a.top(), b.top()), y1 = std::max(a.bottom(), b.bottom());
  long inter = 0, uni = 0;
  for (double y = y0 + pitch / 2; y < y1; y += pitch)
    for (double x = x0 + pitch / 2; x < x1; x += pitch) {
      const bool ia = x > a.left() && x < a.right() && y > a.top() && y < a.bottom();
      const bool ib = x > b.left() && x < b.right() && y > b.top() && y < b.bottom();
      inter += ia && ib;
      uni += ia || ib;
    }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

struct RasterOverlap {
  bool overlap = false;
  /// Some grid cell is thinner than the tolerance (a near-touching pair).
  bool boundary = false;
};

/// Paints every box on the grid whose lines are all box edges and reports
/// whether any cell interior is covered by two or more boxes.
inline RasterOverlap raster_overlap(std::span<const BoundingBox> boxes, double tol = 1e-9) {
  std::vector<double> xs, ys;
  for (const auto& b : boxes) {
    if (!(b.side > 0)) continue;
    xs.push_back(b.left());
    xs.push_back(b.right());
    ys.push_back(b.top());
    ys.push_back(b.bottom());
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  RasterOverlap r;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) r.boundary |= xs[i + 1] - xs[i] <= tol;
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) r.boundary |= ys[i + 1] - ys[i] <= tol;
  for (std::size_t j = 0; j + 1 < ys.size() && !r.overlap; ++j) {
    const double my = 0.5 * (ys[j] + ys[j + 1]);
    for (std::size_t i = 0; i + 1 < xs.size() && !r.overlap; ++i) {
      const double mx = 0.5 * (xs[i] + xs[i + 1]);
      int cover = 0;
      for (const auto& b : boxes) {
        cover += b.side > 0 && mx > b.left() && mx < b.right() && my > b.top() && my < b.bottom();
      }
      r.overlap = cover >= 2;
    }
  }
  return r;
}

/// Two binary latents and one observation; everything enumerable.
struct ToyModel {
  double prior[4] = {0.1, 0.2, 0.3, 0.4};   // p(z1 z2)
  double lik[4] = {0.05, 0.5, 0.25, 0.8};   // p(x = observed | z)
  double post[4] = {0.15, 0.35, 0.2, 0.3};  // q(z | x), deliberately not the true posterior

  double log_evidence() const {
    double s = 0;
    for (int z = 0; z < 4; ++z) s += prior[z] * lik[z];
    return std::log(s);
  }
  int sample_q(Rng& r) const {
    double u = r.uniform(), c = 0;
    for (int z = 0; z < 4; ++z) {
      c += post[z];
      if (u < c) return z;
    }
    return 3;
  }
  double log_weight(int z) const { return std::log(prior[z] * lik[z]) - std::log(post[z]); }
  double exact_elbo() const {
    double e = 0;
    for (int z = 0; z < 4; ++z) e += post[z] * log_weight(z);
    return e;
  }
};

}  // namespace asr::testing
