#include <cmath>

#include "asr/constraints.hpp"
#include "asr/errors.hpp"
#include "asr/random.hpp"
#include "doctest.h"
#include "fd.hpp"

using namespace asr;

namespace {

std::vector<BoundingBox> boxes(std::initializer_list<BoundingBox> b) { return b; }

SceneLatent scene_of(const std::vector<BoundingBox>& bs) {
  SceneLatent s;
  for (const auto& b : bs) s.objects.push_back({b.cx, b.cy, b.side, {}});
  s.n = static_cast<int>(bs.size());
  return s;
}

}  // namespace

TEST_CASE("hinge") {
  CHECK(hinge(-3) == 0);
  CHECK(hinge(0) == 0);
  CHECK(hinge(2.5) == 2.5);
}

TEST_CASE("geometric functional examples") {
  CHECK(f1_pairwise_overlap(boxes({{10, 10, 10}, {30, 30, 10}})) == 0);
  CHECK(f1_pairwise_overlap(boxes({{10, 10, 10}, {14, 10, 10}})) == doctest::Approx(6));
  CHECK(f1_pairwise_overlap(boxes({{10, 10, 10}})) == 0);
  CHECK(f1_pairwise_overlap(boxes({})) == 0);
  // unordered pairs, counted once
  CHECK(f1_pairwise_overlap(boxes({{10, 10, 10}, {14, 10, 10}, {10, 14, 10}})) == doctest::Approx(6 + 6 + 6));

  CHECK(f_containment(boxes({{25, 25, 20}}), 50) == std::array<double, 4>{0, 0, 0, 0});
  CHECK(f_containment(boxes({{3, 25, 10}}), 50) == std::array<double, 4>{2, 0, 0, 0});
  CHECK(f_containment(boxes({{25, 48, 10}}), 50) == std::array<double, 4>{0, 0, 0, 3});

  CHECK(f6_scale_band(boxes({{0, 0, 15}, {0, 0, 25}, {0, 0, 20}}), 15, 25) == 0);
  CHECK(f6_scale_band(boxes({{0, 0, 30}}), 15, 25) == doctest::Approx(5));
  CHECK(f6_scale_band(boxes({{0, 0, 10}}), 15, 25) == doctest::Approx(5));

  CHECK(f7_scale_similarity(boxes({{0, 0, 20}, {5, 5, 20}}), 0.0) == 0);
  CHECK(f7_scale_similarity(boxes({{0, 0, 20}, {5, 5, 24}}), 2.0) == doctest::Approx(2));
  CHECK(f7_scale_similarity(boxes({{0, 0, 20}, {5, 5, 21}}), 2.0) == 0);
}

TEST_CASE("overlap regularizer examples") {
  SceneConfig cfg;
  OverlapWeights ones{1, 1, 1, 1, 1, 1, 1};
  std::vector<SceneLatent> clean = {scene_of({{12, 12, 20}, {36, 36, 20}}), scene_of({{25, 25, 20}})};
  CHECK(overlap_regularizer(clean, cfg, ones) == 0);

  std::vector<SceneLatent> one = {scene_of({{10, 10, 10}, {14, 10, 10}})};
  cfg.c_min = 5;
  CHECK(overlap_regularizer(one, cfg, {1, 0, 0, 0, 0, 0, 0}) == doctest::Approx(6));

  Rng rng(3);
  std::vector<SceneLatent> rnd;
  for (int i = 0; i < 5; ++i) {
    std::vector<BoundingBox> bs;
    for (int j = 0; j < 3; ++j) bs.push_back({50 * rng.uniform(), 50 * rng.uniform(), 5 + 30 * rng.uniform()});
    rnd.push_back(scene_of(bs));
  }
  OverlapWeights w{1, 2, 3, 4, 5, 6, 7}, w3{3, 6, 9, 12, 15, 18, 21};
  CHECK(overlap_regularizer(rnd, cfg, w3) == doctest::Approx(3 * overlap_regularizer(rnd, cfg, w)));
}

TEST_CASE("count penalties examples") {
  std::vector<int> L{1, 3};
  CHECK(count_match_penalty(CountDistribution{{0, 0, 0, 1, 0}}, L) == 0);
  CHECK(count_match_penalty(CountDistribution{{0.1, 0.8, 0.05, 0.05, 0}}, L) == doctest::Approx(0.22314).epsilon(1e-5));
  CHECK(count_match_penalty(CountDistribution{{0.9, 0.05, 0, 0.05, 0}}, L) ==
        doctest::Approx(-std::log(0.05)).epsilon(1e-9));
  CHECK(count_match_penalty(CountDistribution{{0.9, 0.05, 0, 0.05, 0}}, L) == doctest::Approx(2.9957).epsilon(1e-4));

  std::vector<CountDistribution> uni{{{0, 0.5, 0, 0.5, 0}}};
  CHECK(count_marginal_penalty(uni, L) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<CountDistribution> point{{{0, 1, 0, 0, 0}}};
  CHECK(count_marginal_penalty(point, L) ==
        doctest::Approx(0.5 * std::log(0.5 / kProbFloor) + 0.5 * std::log(0.5 / 1.0)).epsilon(1e-12));
  std::vector<CountDistribution> sym{{{0, 0.25, 0.5, 0.25, 0}}};
  CHECK(count_marginal_penalty(sym, L) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  // batch mean, not per-datum mean
  std::vector<CountDistribution> two{{{0, 1, 0, 0, 0}}, {{0, 0, 0, 1, 0}}};
  CHECK(count_marginal_penalty(two, L) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(count_marginal_penalty(std::vector<CountDistribution>{}, L), ContractViolation);

  CHECK(count_regularizer(two, L, 10, 100) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<CountDistribution> mix{{{0.1, 0.8, 0.05, 0.05, 0}}, {{0.9, 0.05, 0, 0.05, 0}}};
  const double m = (-std::log(0.8) - std::log(0.05)) / 2;
  const double k = 0.5 * std::log(0.5 / 0.425) + 0.5 * std::log(0.5 / 0.05);
  CHECK(count_regularizer(mix, L, 10, 100) == doctest::Approx(10 * m + 100 * k).epsilon(1e-9));
  CHECK(count_regularizer(mix, L, 0, 0) == 0);
}

TEST_CASE("total penalty and term registry") {
  SceneConfig cfg;
  std::vector<SceneLatent> scenes{scene_of({{25, 25, 20}})};
  BatchContext ctx{scenes, {}, &cfg};
  std::vector<ConstraintTerm> terms;
  for (const auto& id : builtin_term_ids()) terms.push_back(make_term(id, 1.0));
  CHECK(total_penalty(terms, ctx) == 0);

  ConstraintTerm two{"custom", 3.0, [](const BatchContext&) { return 2.0; }};
  CHECK(total_penalty(std::span<const ConstraintTerm>(&two, 1), ctx) == 6);
  ConstraintTerm neg{"custom", 3.0, [](const BatchContext&) { return -4.0; }};
  CHECK(total_penalty(std::span<const ConstraintTerm>(&neg, 1), ctx) == 0);

  CHECK_THROWS_AS(make_term("overlapp", 1.0), ContractViolation);
  CHECK_THROWS_AS(make_term("overlap", -1.0), ContractViolation);
  CHECK_THROWS_AS(PenaltySpec({{"nope", 1.0}}), ContractViolation);
}

TEST_CASE("scene config validation") {
  SceneConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.allowed_counts = {0, 1, 2, 3};
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg.allowed_counts = {};
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = SceneConfig{};
  cfg.c_min = 30;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = SceneConfig{};
  cfg.eps = -1;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
}

TEST_CASE("functionals are nonnegative and translation covariant under fuzzing") {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<BoundingBox> bs;
    const int n = rng.uniform_int(0, 5);
    for (int j = 0; j < n; ++j) bs.push_back({-20 + 90 * rng.uniform(), -20 + 90 * rng.uniform(), -5 + 40 * rng.uniform()});
    const double d = -10 + 20 * rng.uniform();
    std::vector<BoundingBox> shifted = bs;
    for (auto& b : shifted) {
      b.cx += d;
      b.cy += d;
    }
    SceneConfig cfg;
    auto f = overlap_functionals(bs, cfg);
    for (double v : f) CHECK(v >= 0);
    auto g = overlap_functionals(shifted, cfg);
    CHECK(g[0] == doctest::Approx(f[0]));
    CHECK(g[5] == doctest::Approx(f[5]));
    CHECK(g[6] == doctest::Approx(f[6]));
    double left = 0;
    for (const auto& b : shifted) left += hinge(b.side / 2 - b.cx);
    CHECK(g[1] == doctest::Approx(left));
  }
}

TEST_CASE("batched functionals agree with the scalar ones") {
  Rng rng(6);
  const int B = 16, K = 4;
  Matrix x(B, K), y(B, K), s(B, K), mask(B, K);
  for (int b = 0; b < B; ++b) {
    const int n = rng.uniform_int(0, K);
    for (int t = 0; t < K; ++t) {
      x(b, t) = static_cast<Real>(-5 + 60 * rng.uniform());
      y(b, t) = static_cast<Real>(-5 + 60 * rng.uniform());
      s(b, t) = static_cast<Real>(5 + 30 * rng.uniform());
      mask(b, t) = t < n ? 1 : 0;
    }
  }
  ad::Tape tape;
  LatentBatch z{tape.constant(x), tape.constant(y), tape.constant(s), mask, {}};
  SceneConfig cfg;
  ad::Var f1 = diff::f1_pairwise_overlap(z);
  auto fc = diff::f_containment(z, cfg.S);
  ad::Var f6 = diff::f6_scale_band(z, cfg.c_min, cfg.c_max);
  ad::Var f7 = diff::f7_scale_similarity(z, cfg.eps);
  for (int b = 0; b < B; ++b) {
    std::vector<BoundingBox> bs;
    for (int t = 0; t < K; ++t)
      if (mask(b, t) > 0) bs.push_back({x(b, t), y(b, t), s(b, t)});
    auto ref = overlap_functionals(bs, cfg);
    CHECK(f1.value()(b, 0) == doctest::Approx(ref[0]));
    for (int k = 0; k < 4; ++k) CHECK(fc[static_cast<std::size_t>(k)].value()(b, 0) == doctest::Approx(ref[1 + k]));
    CHECK(f6.value()(b, 0) == doctest::Approx(ref[5]));
    CHECK(f7.value()(b, 0) == doctest::Approx(ref[6]));
  }

  PenaltySpec spec({{"overlap", 2.0}, {"scale_band", 0.5}, {"inside_left", 1.0}});
  auto res = spec.evaluate(z, cfg);
  CHECK(ad::mean(res.per_datum).scalar() == doctest::Approx(res.total.scalar()));
  std::vector<ConstraintTerm> terms{make_term("overlap", 2.0), make_term("scale_band", 0.5),
                                    make_term("inside_left", 1.0)};
  std::vector<SceneLatent> scenes;
  for (int b = 0; b < B; ++b) {
    std::vector<BoundingBox> bs;
    for (int t = 0; t < K; ++t)
      if (mask(b, t) > 0) bs.push_back({x(b, t), y(b, t), s(b, t)});
    scenes.push_back(scene_of(bs));
  }
  BatchContext ctx{scenes, {}, &cfg};
  CHECK(res.total.scalar() == doctest::Approx(total_penalty(terms, ctx)));
}

TEST_CASE("batched count penalties agree with the scalar ones") {
  Matrix p(3, 5);
  p << 0.1, 0.8, 0.05, 0.05, 0, 0.9, 0.05, 0, 0.05, 0, 0.2, 0.2, 0.2, 0.2, 0.2;
  std::vector<int> L{1, 3};
  ad::Tape tape;
  ad::Var cp = tape.constant(p);
  ad::Var m = diff::count_match_penalty(cp, L);
  ad::Var k = diff::count_marginal_penalty(cp, L);
  std::vector<CountDistribution> qs;
  for (int b = 0; b < 3; ++b) {
    qs.push_back({std::vector<double>(p.row(b).data(), p.row(b).data() + 5)});
    CHECK(m.value()(b, 0) == doctest::Approx(count_match_penalty(qs.back(), L)));
  }
  CHECK(k.scalar() == doctest::Approx(count_marginal_penalty(qs, L)));
}

TEST_CASE("functional gradients match finite differences away from kinks") {
  Rng rng(7);
  SceneConfig cfg;
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int B = 3, K = 3;
    Matrix x(B, K), y(B, K), s(B, K), mask = Matrix::Ones(B, K);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = static_cast<Real>(-5 + 60 * rng.uniform());
      y.data()[i] = static_cast<Real>(-5 + 60 * rng.uniform());
      s.data()[i] = static_cast<Real>(5 + 30 * rng.uniform());
    }
    using V = std::vector<ad::Var>;
    auto build = [&](const V& v) { return LatentBatch{v[0], v[1], v[2], mask, {}}; };
    const std::vector<std::function<ad::Var(const LatentBatch&)>> fs = {
        [](const LatentBatch& z) { return diff::f1_pairwise_overlap(z); },
        [&](const LatentBatch& z) { return diff::f_containment(z, cfg.S)[0]; },
        [&](const LatentBatch& z) { return diff::f_containment(z, cfg.S)[1]; },
        [&](const LatentBatch& z) { return diff::f_containment(z, cfg.S)[2]; },
        [&](const LatentBatch& z) { return diff::f_containment(z, cfg.S)[3]; },
        [&](const LatentBatch& z) { return diff::f6_scale_band(z, cfg.c_min, cfg.c_max); },
        [&](const LatentBatch& z) { return diff::f7_scale_similarity(z, cfg.eps); },
    };
    for (const auto& f : fs) {
      auto r = asr::testing::check_gradient([&](ad::Tape&, const V& v) { return ad::sum(f(build(v))); }, {x, y, s},
                                            1e-6);
      if (r.analytic_norm > 0) ++checked;
      CHECK(r.rel_error < 1e-4);
    }
  }
  CHECK(checked > 100);
}
