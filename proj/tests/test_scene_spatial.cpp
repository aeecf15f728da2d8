#include <cmath>
#include <numeric>

#include "asr/errors.hpp"
#include "asr/generative.hpp"
#include "asr/random.hpp"
#include "asr/scene.hpp"
#include "asr/spatial.hpp"
#include "doctest.h"
#include "fd.hpp"

using namespace asr;

TEST_CASE("induced count distribution examples") {
  auto a = induced_count_distribution(std::vector<double>{1, 1}, 2);
  CHECK(a.probs == std::vector<double>{0, 0, 1});
  auto b = induced_count_distribution(std::vector<double>{0, 0.7}, 2);
  CHECK(b.probs == std::vector<double>{1, 0, 0});
  auto c = induced_count_distribution(std::vector<double>{0.5, 0.5}, 2);
  CHECK(c[0] == doctest::Approx(0.5));
  CHECK(c[1] == doctest::Approx(0.25));
  CHECK(c[2] == doctest::Approx(0.25));
  CHECK_THROWS_AS(induced_count_distribution(std::vector<double>{0.5}, 2), ContractViolation);
  CHECK_THROWS_AS(induced_count_distribution(std::vector<double>{0.5, 1.5}, 2), ContractViolation);
}

TEST_CASE("induced count distribution sums to one on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int K = rng.uniform_int(1, 8);
    std::vector<double> p(static_cast<std::size_t>(K));
    for (auto& v : p) v = rng.uniform();
    auto q = induced_count_distribution(p, K);
    CHECK(q.max_count() == K);
    CHECK(std::accumulate(q.probs.begin(), q.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (double v : q.probs) CHECK(v >= 0.0);
  }
}

TEST_CASE("batched count distribution agrees with the scalar one and is differentiable") {
  Rng rng(12);
  Matrix p(4, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<Real>(0.05 + 0.9 * rng.uniform());
  ad::Tape tape;
  Matrix out = induced_count_distribution(tape.constant(p)).value();
  for (int b = 0; b < 4; ++b) {
    std::vector<double> row(p.row(b).data(), p.row(b).data() + 3);
    auto q = induced_count_distribution(row, 3);
    for (int n = 0; n <= 3; ++n) CHECK(out(b, n) == doctest::Approx(q[n]).epsilon(1e-12));
  }
  auto f = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    Matrix w(1, 4);
    w << 0.3, -1.0, 2.0, 0.7;
    return ad::sum(induced_count_distribution(v[0]) * t.constant(w));
  };
  CHECK(asr::testing::check_gradient(f, {p}).rel_error < 1e-7);
}

TEST_CASE("point mass kl examples") {
  CHECK(point_mass_kl(1, CountDistribution{{0, 1, 0}}) == 0.0);
  CHECK(point_mass_kl(1, CountDistribution{{0.1, 0.8, 0.1}}) == doctest::Approx(0.22314).epsilon(1e-5));
  CHECK(point_mass_kl(0, CountDistribution{{0.5, 0.25, 0.25}}) == doctest::Approx(0.69315).epsilon(1e-5));
  CHECK(point_mass_kl(0, CountDistribution{{0.0, 1.0, 0.0}}) == doctest::Approx(-std::log(kProbFloor)));
  CHECK_THROWS_AS(point_mass_kl(3, CountDistribution{{0.5, 0.25, 0.25}}), ContractViolation);
  CHECK_THROWS_AS(point_mass_kl(-1, CountDistribution{{0.5, 0.25, 0.25}}), ContractViolation);
}

TEST_CASE("box from latent") {
  CHECK(box_from_latent({10, 10, 20, {}}) == BoundingBox{10, 10, 20});
  CHECK(box_from_latent({0, 0, 0, {}}) == BoundingBox{0, 0, 0});
  BoundingBox b = box_from_latent({25, 25, 20, {}});
  CHECK(b.left() == 15);
  CHECK(b.right() == 35);
  CHECK(b.top() == 15);
  CHECK(b.bottom() == 35);
}

namespace {

Glyph smooth_glyph(int G) {
  Glyph g = Canvas::zeros(G);
  for (int r = 0; r < G; ++r)
    for (int c = 0; c < G; ++c) {
      const double dx = (c + 0.5 - G / 2.0) / G, dy = (r + 0.5 - G / 2.0) / G;
      g.pixels(r, c) = static_cast<Real>(std::exp(-8 * (dx * dx + dy * dy)));
    }
  return g;
}

}  // namespace

TEST_CASE("place glyph examples") {
  const int S = 50, G = 20;
  Canvas z = place_glyph(Canvas::zeros(G), {17.3, 22.8, 21.4}, S);
  CHECK(z.pixels.cwiseAbs().maxCoeff() == 0.0);

  Glyph ones{Matrix::Ones(G, G)};
  Canvas full = place_glyph(ones, {S / 2.0, S / 2.0, double(S)}, S);
  CHECK((full.pixels.array() - 1).abs().maxCoeff() <= 0.05);

  // Zero outside the box extent, exact.
  BoundingBox box{20.3, 31.7, 12.6};
  Canvas c = place_glyph(ones, box, S);
  for (int r = 0; r < S; ++r)
    for (int col = 0; col < S; ++col) {
      const bool outside = col + 1 <= box.left() || col >= box.right() || r + 1 <= box.top() || r >= box.bottom();
      if (outside) CHECK(c.pixels(r, col) == 0.0);
    }
  // Total mass equals the box area for a ones glyph.
  CHECK(c.pixels.sum() == doctest::Approx(box.side * box.side).epsilon(1e-9));

  // Partly outside the canvas writes the visible portion only.
  Canvas edge = place_glyph(ones, {2.0, 25.0, 10.0}, S);
  CHECK(edge.pixels.sum() == doctest::Approx(7.0 * 10.0).epsilon(1e-9));
  CHECK(place_glyph(ones, {-30, -30, 10}, S).pixels.sum() == 0.0);
}

TEST_CASE("place then crop recovers the glyph for side >= G") {
  const int S = 50, G = 20;
  Glyph g = smooth_glyph(G);
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const double side = G + 10 * rng.uniform();
    const double cx = side / 2 + 1 + (S - side - 2) * rng.uniform();
    const double cy = side / 2 + 1 + (S - side - 2) * rng.uniform();
    Canvas placed = place_glyph(g, {cx, cy, side}, S);
    ad::Tape tape;
    Matrix back = spatial::crop(tape.constant(placed.flat()), tape.constant(Real(cx)), tape.constant(Real(cy)),
                                tape.constant(Real(side)), S, G)
                      .value();
    CHECK((back - g.flat()).cwiseAbs().maxCoeff() <= 0.1);
  }
}

TEST_CASE("place and crop gradients match finite differences") {
  const int S = 30, G = 8;
  Rng rng(22);
  Matrix glyph(2, G * G);
  for (Eigen::Index i = 0; i < glyph.size(); ++i) glyph.data()[i] = static_cast<Real>(rng.uniform());
  Matrix image(2, S * S);
  for (Eigen::Index i = 0; i < image.size(); ++i) image.data()[i] = static_cast<Real>(rng.uniform());
  Matrix weights(2, S * S);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = static_cast<Real>(rng.normal());
  Matrix gw(2, G * G);
  for (Eigen::Index i = 0; i < gw.size(); ++i) gw.data()[i] = static_cast<Real>(rng.normal());
  for (int trial = 0; trial < 20; ++trial) {
    Matrix cx(2, 1), cy(2, 1), side(2, 1);
    for (int b = 0; b < 2; ++b) {
      side(b, 0) = static_cast<Real>(6 + 10 * rng.uniform());
      cx(b, 0) = static_cast<Real>(4 + 22 * rng.uniform());
      cy(b, 0) = static_cast<Real>(4 + 22 * rng.uniform());
    }
    auto fp = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
      return ad::sum(spatial::place(v[0], v[1], v[2], v[3], G, S) * t.constant(weights));
    };
    CHECK(asr::testing::check_gradient(fp, {glyph, cx, cy, side}, 1e-5).rel_error < 1e-3);
    auto fc = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
      return ad::sum(spatial::crop(v[0], v[1], v[2], v[3], S, G) * t.constant(gw));
    };
    CHECK(asr::testing::check_gradient(fc, {image, cx, cy, side}, 1e-5).rel_error < 1e-3);
  }
}

TEST_CASE("non-positive side writes nothing") {
  ad::Tape tape;
  Matrix g = Matrix::Ones(1, 16);
  ad::Var out = spatial::place(tape.constant(g), tape.constant(Real(10)), tape.constant(Real(10)),
                               tape.constant(Real(-3)), 4, 20);
  CHECK(out.value().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(spatial::place(tape.constant(g), tape.constant(Real(10)), tape.constant(Real(10)),
                                 tape.constant(Real(3)), 5, 20),
                  ContractViolation);
}
