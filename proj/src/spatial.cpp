#include "asr/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "asr/errors.hpp"

namespace asr::spatial {

namespace {

// Per-axis sampling plan for one box along one image axis.
struct AxisTap {
  int pixel = 0;   // canvas index along the axis
  double cov = 0;  // covered fraction of the pixel
  double dcov_dlo = 0;
  double dcov_dhi = 0;
  int i0 = 0;  // glyph taps
  int i1 = 0;
  double frac = 0;
  double du_dcenter = 0;  // 0 when the coordinate is clamped
  double du_dside = 0;
};

std::vector<AxisTap> plan_axis(double center, double side, int G, int S) {
  std::vector<AxisTap> taps;
  if (!(side > 0.0)) return taps;
  const double lo = center - side / 2;
  const double hi = center + side / 2;
  const double k = G / side;
  const int first = std::max(0, static_cast<int>(std::floor(lo)));
  const int last = std::min(S - 1, static_cast<int>(std::ceil(hi)) - 1);
  for (int c = first; c <= last; ++c) {
    const double a = std::max(static_cast<double>(c), lo);
    const double b = std::min(static_cast<double>(c + 1), hi);
    if (b <= a) continue;
    AxisTap t;
    t.pixel = c;
    t.cov = b - a;
    t.dcov_dlo = lo > c ? -1.0 : 0.0;
    t.dcov_dhi = hi < c + 1 ? 1.0 : 0.0;
    const double rel = c + 0.5 - lo;
    const double u = rel * k - 0.5;
    double uc = u;
    bool clamped = false;
    if (u <= 0.0) {
      uc = 0.0;
      clamped = true;
    } else if (u >= G - 1) {
      uc = G - 1;
      clamped = true;
    }
    t.i0 = std::min(static_cast<int>(std::floor(uc)), G - 1);
    t.i1 = std::min(t.i0 + 1, G - 1);
    t.frac = uc - t.i0;
    if (!clamped) {
      t.du_dcenter = -k;
      t.du_dside = 0.5 * k - rel * k / side;
    }
    taps.push_back(t);
  }
  return taps;
}

void check_box_inputs(const ad::Var& data, const ad::Var& cx, const ad::Var& cy, const ad::Var& side, int width,
                      const char* what) {
  const auto b = data.rows();
  if (data.cols() != static_cast<Eigen::Index>(width) * width) {
    throw ContractViolation(std::string(what) + ": image width mismatch");
  }
  for (const ad::Var* v : {&cx, &cy, &side}) {
    if (v->rows() != b || v->cols() != 1) throw ContractViolation(std::string(what) + ": box inputs must be B x 1");
  }
}

}  // namespace

ad::Var place(const ad::Var& glyph, const ad::Var& cx, const ad::Var& cy, const ad::Var& side, int G, int S) {
  check_box_inputs(glyph, cx, cy, side, G, "place");
  const Eigen::Index B = glyph.rows();
  Matrix out = Matrix::Zero(B, static_cast<Eigen::Index>(S) * S);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto xs = plan_axis(cx.value()(b, 0), side.value()(b, 0), G, S);
    const auto ys = plan_axis(cy.value()(b, 0), side.value()(b, 0), G, S);
    const Real* g = glyph.value().row(b).data();
    Real* o = out.row(b).data();
    for (const AxisTap& ty : ys) {
      for (const AxisTap& tx : xs) {
        const double top = (1 - tx.frac) * g[ty.i0 * G + tx.i0] + tx.frac * g[ty.i0 * G + tx.i1];
        const double bot = (1 - tx.frac) * g[ty.i1 * G + tx.i0] + tx.frac * g[ty.i1 * G + tx.i1];
        const double val = (1 - ty.frac) * top + ty.frac * bot;
        o[ty.pixel * S + tx.pixel] = static_cast<Real>(tx.cov * ty.cov * val);
      }
    }
  }
  return glyph.tape()->record(std::move(out), {glyph, cx, cy, side}, [glyph, cx, cy, side, G, S](const Matrix& grad) {
    ad::Tape* tape = glyph.tape();
    const Eigen::Index B = glyph.rows();
    Matrix gg = Matrix::Zero(B, static_cast<Eigen::Index>(G) * G);
    Matrix gcx = Matrix::Zero(B, 1);
    Matrix gcy = Matrix::Zero(B, 1);
    Matrix gside = Matrix::Zero(B, 1);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto xs = plan_axis(cx.value()(b, 0), side.value()(b, 0), G, S);
      const auto ys = plan_axis(cy.value()(b, 0), side.value()(b, 0), G, S);
      const Real* g = glyph.value().row(b).data();
      const Real* go = grad.row(b).data();
      Real* dg = gg.row(b).data();
      double dcx = 0, dcy = 0, dside = 0;
      for (const AxisTap& ty : ys) {
        for (const AxisTap& tx : xs) {
          const double up = go[ty.pixel * S + tx.pixel];
          if (up == 0.0) continue;
          const double g00 = g[ty.i0 * G + tx.i0], g01 = g[ty.i0 * G + tx.i1];
          const double g10 = g[ty.i1 * G + tx.i0], g11 = g[ty.i1 * G + tx.i1];
          const double top = (1 - tx.frac) * g00 + tx.frac * g01;
          const double bot = (1 - tx.frac) * g10 + tx.frac * g11;
          const double val = (1 - ty.frac) * top + ty.frac * bot;
          const double cov = tx.cov * ty.cov;
          const double w = up * cov;
          dg[ty.i0 * G + tx.i0] += static_cast<Real>(w * (1 - ty.frac) * (1 - tx.frac));
          dg[ty.i0 * G + tx.i1] += static_cast<Real>(w * (1 - ty.frac) * tx.frac);
          dg[ty.i1 * G + tx.i0] += static_cast<Real>(w * ty.frac * (1 - tx.frac));
          dg[ty.i1 * G + tx.i1] += static_cast<Real>(w * ty.frac * tx.frac);
          const double dval_du = (1 - ty.frac) * (g01 - g00) + ty.frac * (g11 - g10);
          const double dval_dv = bot - top;
          const double dcovx_dc = tx.dcov_dlo + tx.dcov_dhi;
          const double dcovy_dc = ty.dcov_dlo + ty.dcov_dhi;
          const double dcovx_ds = 0.5 * (tx.dcov_dhi - tx.dcov_dlo);
          const double dcovy_ds = 0.5 * (ty.dcov_dhi - ty.dcov_dlo);
          dcx += up * (dcovx_dc * ty.cov * val + cov * dval_du * tx.du_dcenter);
          dcy += up * (dcovy_dc * tx.cov * val + cov * dval_dv * ty.du_dcenter);
          dside += up * ((dcovx_ds * ty.cov + tx.cov * dcovy_ds) * val +
                         cov * (dval_du * tx.du_dside + dval_dv * ty.du_dside));
        }
      }
      gcx(b, 0) = static_cast<Real>(dcx);
      gcy(b, 0) = static_cast<Real>(dcy);
      gside(b, 0) = static_cast<Real>(dside);
    }
    tape->accumulate(glyph, gg);
    tape->accumulate(cx, gcx);
    tape->accumulate(cy, gcy);
    tape->accumulate(side, gside);
  });
}

namespace {

struct ReadTap {
  int i0 = 0;
  double frac = 0;
  double du_dside = 0;
};

std::vector<ReadTap> plan_read(double center, double side, int G) {
  std::vector<ReadTap> taps(static_cast<std::size_t>(G));
  const double lo = center - side / 2;
  for (int j = 0; j < G; ++j) {
    const double rel = (j + 0.5) / G;
    const double u = lo + rel * side - 0.5;
    const double fl = std::floor(u);
    taps[static_cast<std::size_t>(j)] = {static_cast<int>(fl), u - fl, rel - 0.5};
  }
  return taps;
}

inline double pixel_or_zero(const Real* img, int S, int r, int c) {
  return (r < 0 || c < 0 || r >= S || c >= S) ? 0.0 : static_cast<double>(img[r * S + c]);
}

}  // namespace

ad::Var crop(const ad::Var& image, const ad::Var& cx, const ad::Var& cy, const ad::Var& side, int S, int G) {
  check_box_inputs(image, cx, cy, side, S, "crop");
  const Eigen::Index B = image.rows();
  Matrix out(B, static_cast<Eigen::Index>(G) * G);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto xs = plan_read(cx.value()(b, 0), side.value()(b, 0), G);
    const auto ys = plan_read(cy.value()(b, 0), side.value()(b, 0), G);
    const Real* img = image.value().row(b).data();
    Real* o = out.row(b).data();
    for (int a = 0; a < G; ++a) {
      const ReadTap& ty = ys[static_cast<std::size_t>(a)];
      for (int c = 0; c < G; ++c) {
        const ReadTap& tx = xs[static_cast<std::size_t>(c)];
        const double v00 = pixel_or_zero(img, S, ty.i0, tx.i0), v01 = pixel_or_zero(img, S, ty.i0, tx.i0 + 1);
        const double v10 = pixel_or_zero(img, S, ty.i0 + 1, tx.i0), v11 = pixel_or_zero(img, S, ty.i0 + 1, tx.i0 + 1);
        const double val =
            (1 - ty.frac) * ((1 - tx.frac) * v00 + tx.frac * v01) + ty.frac * ((1 - tx.frac) * v10 + tx.frac * v11);
        o[a * G + c] = static_cast<Real>(val);
      }
    }
  }
  return image.tape()->record(std::move(out), {image, cx, cy, side}, [image, cx, cy, side, S, G](const Matrix& grad) {
    ad::Tape* tape = image.tape();
    const Eigen::Index B = image.rows();
    Matrix gimg;
    if (image.needs_grad()) gimg = Matrix::Zero(B, static_cast<Eigen::Index>(S) * S);
    Matrix gcx = Matrix::Zero(B, 1);
    Matrix gcy = Matrix::Zero(B, 1);
    Matrix gside = Matrix::Zero(B, 1);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto xs = plan_read(cx.value()(b, 0), side.value()(b, 0), G);
      const auto ys = plan_read(cy.value()(b, 0), side.value()(b, 0), G);
      const Real* img = image.value().row(b).data();
      const Real* go = grad.row(b).data();
      double dcx = 0, dcy = 0, dside = 0;
      for (int a = 0; a < G; ++a) {
        const ReadTap& ty = ys[static_cast<std::size_t>(a)];
        for (int c = 0; c < G; ++c) {
          const ReadTap& tx = xs[static_cast<std::size_t>(c)];
          const double up = go[a * G + c];
          if (up == 0.0) continue;
          const double v00 = pixel_or_zero(img, S, ty.i0, tx.i0), v01 = pixel_or_zero(img, S, ty.i0, tx.i0 + 1);
          const double v10 = pixel_or_zero(img, S, ty.i0 + 1, tx.i0), v11 = pixel_or_zero(img, S, ty.i0 + 1, tx.i0 + 1);
          const double top = (1 - tx.frac) * v00 + tx.frac * v01;
          const double bot = (1 - tx.frac) * v10 + tx.frac * v11;
          const double dval_du = (1 - ty.frac) * (v01 - v00) + ty.frac * (v11 - v10);
          const double dval_dv = bot - top;
          dcx += up * dval_du;
          dcy += up * dval_dv;
          dside += up * (dval_du * tx.du_dside + dval_dv * ty.du_dside);
          if (gimg.size() != 0) {
            Real* gi = gimg.row(b).data();
            auto scatter = [&](int r, int cc, double w) {
              if (r >= 0 && cc >= 0 && r < S && cc < S) gi[r * S + cc] += static_cast<Real>(up * w);
            };
            scatter(ty.i0, tx.i0, (1 - ty.frac) * (1 - tx.frac));
            scatter(ty.i0, tx.i0 + 1, (1 - ty.frac) * tx.frac);
            scatter(ty.i0 + 1, tx.i0, ty.frac * (1 - tx.frac));
            scatter(ty.i0 + 1, tx.i0 + 1, ty.frac * tx.frac);
          }
        }
      }
      gcx(b, 0) = static_cast<Real>(dcx);
      gcy(b, 0) = static_cast<Real>(dcy);
      gside(b, 0) = static_cast<Real>(dside);
    }
    if (gimg.size() != 0) tape->accumulate(image, gimg);
    tape->accumulate(cx, gcx);
    tape->accumulate(cy, gcy);
    tape->accumulate(side, gside);
  });
}

}  // namespace asr::spatial
