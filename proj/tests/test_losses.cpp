#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ptdet/gradcheck.hpp"
#include "ptdet/losses.hpp"
#include "support.hpp"

using namespace ptdet;
using testing::random_grid;

namespace {

Heatmap mask(int h, int w, std::initializer_list<std::pair<int, int>> ones) {
  Heatmap m(h, w);
  for (auto [y, x] : ones) m(y, x) = 1.0;
  return m;
}

double scalar_value(Tape& t, NodeId n) { return t.value(n).data()[0]; }

Grid permute(const Grid& g, const std::vector<std::size_t>& perm) {
  Grid out(g.height(), g.width(), g.channels());
  for (std::size_t i = 0; i < perm.size(); ++i) out.data()[i] = g.data()[perm[i]];
  return out;
}

}  // namespace

TEST_CASE("mse") {
  Rng rng(1);
  const Heatmap g = random_grid(rng, 5, 6, 1, 0.0, 0.9);
  CHECK(mse(g, g) == 0.0);
  Heatmap p = g;
  for (double& v : p.values()) v += 0.1;
  CHECK(mse(p, g) == doctest::Approx(0.01).epsilon(1e-12));

  const Heatmap a = random_grid(rng, 7, 3, 1, 0.0, 1.0);
  const Heatmap b = random_grid(rng, 7, 3, 1, 0.0, 1.0);
  double acc = 0.0;
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 3; ++x) acc += (a(y, x) - b(y, x)) * (a(y, x) - b(y, x));
  CHECK(std::abs(mse(a, b) - acc / 21.0) < 1e-12);
  CHECK_THROWS_AS(mse(a, Heatmap(3, 7)), ShapeError);
}

TEST_CASE("soft dice") {
  const Heatmap g = mask(4, 4, {{0, 0}, {1, 1}});
  CHECK(sdc(g, g) == doctest::Approx(1.0).epsilon(1e-9));
  const Heatmap disjoint = mask(4, 4, {{2, 2}, {3, 3}});
  CHECK(sdc(disjoint, g) == doctest::Approx(1e-6 / (4.0 + 1e-6)).epsilon(1e-12));
  const Heatmap half = mask(4, 4, {{0, 0}, {3, 3}});
  CHECK(sdc(half, g) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(sdc(g, Heatmap(4, 5)), ShapeError);
}

TEST_CASE("composite L1") {
  const Heatmap g = encode(PointSet(12, 12, {{5.0, 6.0}}), DistributionSpec::gaussian(2.0));
  CHECK(std::abs(loss_l1(g, g)) < 1e-6);
  const Heatmap b = mask(12, 12, {{5, 6}, {2, 2}});
  CHECK(std::abs(loss_l1(b, b)) < 2e-6);
  const Heatmap zero(12, 12);
  double sq = 0.0;
  for (double v : g.values()) sq += v * v;
  const double expected = sq / 144.0 + 1.0 - 1e-6 / (sq + 1e-6);
  CHECK(loss_l1(zero, g) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("F-beta hand fixtures") {
  const Heatmap g = mask(3, 3, {{0, 0}, {0, 1}});
  CHECK(f_beta_score(g, g) == doctest::Approx(1.0).epsilon(1e-9));

  // TP 1, FN 1, FP 1: (5 + e) / (5 + 4 + 1 + e)
  const Heatmap p = mask(3, 3, {{0, 0}, {2, 2}});
  CHECK(std::abs(f_beta_score(p, g, 2.0) - 0.5) < 1e-5);

  CHECK(f_beta_score(Heatmap(3, 3), g) < 1e-6);

  const Heatmap g1 = mask(3, 3, {{0, 0}, {0, 1}});
  const Heatmap fn_case = mask(3, 3, {{0, 0}});            // TP 1, FN 1
  const Heatmap g2 = mask(3, 3, {{0, 0}});
  const Heatmap fp_case = mask(3, 3, {{0, 0}, {1, 1}});    // TP 1, FP 1
  const double fn_score = f_beta_score(fn_case, g1, 2.0);
  const double fp_score = f_beta_score(fp_case, g2, 2.0);
  CHECK(std::abs(fn_score - 5.0 / 9.0) < 1e-5);
  CHECK(std::abs(fp_score - 5.0 / 6.0) < 1e-5);

  const LossConfig v2{2.0, 1e-6, 2};
  CHECK(loss_l2(fn_case, g1, v2) > loss_l2(fp_case, g2, v2));
  CHECK(std::abs(loss_l2(fn_case, g1, v2) - 4.0 / 9.0) < 1e-5);
  CHECK(std::abs(loss_l2(fp_case, g2, v2) - 1.0 / 6.0) < 1e-5);

  CHECK_THROWS_AS(f_beta_score(p, Heatmap(3, 3, 1, 0.5)), std::invalid_argument);
}

TEST_CASE("F-beta penalises a missed pixel more than a spurious one") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Heatmap g(6, 6);
    Heatmap p(6, 6);
    for (int i = 0; i < 36; ++i) {
      g.data()[i] = bernoulli(rng, 0.3) ? 1.0 : 0.0;
      p.data()[i] = g.data()[i] * uniform(rng, 0.5, 1.0);
    }
    g(0, 0) = 1.0;
    p(0, 0) = 1.0;
    g(5, 5) = 0.0;
    p(5, 5) = 0.0;
    g(5, 4) = 1.0;
    p(5, 4) = 1.0;
    const double base = f_beta_score(p, g);
    Heatmap missed = p;
    missed(5, 4) = 0.0;  // one more false negative
    Heatmap spurious = p;
    spurious(5, 5) = 1.0;  // one more false positive
    CHECK(base - f_beta_score(missed, g) > base - f_beta_score(spurious, g));
  }
}

TEST_CASE("loss config and variants") {
  CHECK_THROWS(LossConfig{0.0, 1e-6, 1}.validate());
  CHECK_THROWS(LossConfig{2.0, 0.0, 1}.validate());
  CHECK_THROWS(LossConfig{2.0, 1e-6, 3}.validate());

  const Heatmap g_heat = encode(PointSet(10, 10, {{4.0, 4.0}}), DistributionSpec::gaussian(1.5));
  const Heatmap g_bin = encode(PointSet(10, 10, {{4.0, 4.0}}), DistributionSpec::binary());
  CHECK(std::abs(loss_l2(g_heat, g_heat, LossConfig{2.0, 1e-6, 1})) < 2e-6);
  CHECK(std::abs(loss_l2(g_bin, g_bin, LossConfig{2.0, 1e-6, 2})) < 2e-6);
  CHECK_THROWS(loss_l2(g_heat, g_heat, LossConfig{2.0, 1e-6, 2}));

  for (int variant : {1, 2}) {
    const LossConfig cfg{2.0, 1e-6, variant};
    const Heatmap s2_target = variant == 1 ? g_heat : g_bin;
    CHECK(std::abs(loss_total(g_heat, s2_target, g_heat, g_bin, cfg)) < 4e-6);
    Rng rng(3);
    const Heatmap s1 = random_grid(rng, 10, 10, 1, 0.0, 1.0);
    const Heatmap s2 = random_grid(rng, 10, 10, 1, 0.0, 1.0);
    CHECK(loss_total(s1, s2, g_heat, g_bin, cfg) == loss_l1(s1, g_heat) + loss_l2(s2, s2_target, cfg));
  }
}

TEST_CASE("losses are non-negative and symmetric under joint permutation") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Heatmap p = random_grid(rng, 5, 5, 1, 0.0, 1.0);
    const Heatmap gh = random_grid(rng, 5, 5, 1, 0.0, 1.0);
    Heatmap gb(5, 5);
    for (double& v : gb.values()) v = bernoulli(rng, 0.4) ? 1.0 : 0.0;
    std::vector<std::size_t> perm(25);
    for (std::size_t i = 0; i < 25; ++i) perm[i] = i;
    for (std::size_t i = 25; i > 1; --i) std::swap(perm[i - 1], perm[rng_index(rng, i)]);

    CHECK(mse(p, gh) >= 0.0);
    CHECK(loss_l1(p, gh) >= 0.0);
    CHECK(loss_l2(p, gb, {2.0, 1e-6, 2}) >= 0.0);
    const double f = f_beta_score(p, gb);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);

    const Heatmap pp = permute(p, perm), ghp = permute(gh, perm), gbp = permute(gb, perm);
    CHECK(mse(pp, ghp) == doctest::Approx(mse(p, gh)).epsilon(1e-12));
    CHECK(sdc(pp, ghp) == doctest::Approx(sdc(p, gh)).epsilon(1e-12));
    CHECK(f_beta_score(pp, gbp) == doctest::Approx(f).epsilon(1e-12));
  }
}

TEST_CASE("tape losses agree with the value versions") {
  Rng rng(5);
  const Heatmap p = random_grid(rng, 6, 5, 1, 0.0, 1.0);
  const Heatmap gh = random_grid(rng, 6, 5, 1, 0.0, 1.0);
  Heatmap gb(6, 5);
  for (double& v : gb.values()) v = bernoulli(rng, 0.5) ? 1.0 : 0.0;
  Tape t;
  const NodeId pn = t.constant(p);
  CHECK(scalar_value(t, mse(t, pn, gh)) == doctest::Approx(mse(p, gh)).epsilon(1e-14));
  CHECK(scalar_value(t, sdc(t, pn, gh)) == doctest::Approx(sdc(p, gh)).epsilon(1e-14));
  CHECK(scalar_value(t, loss_l1(t, pn, gh)) == doctest::Approx(loss_l1(p, gh)).epsilon(1e-14));
  CHECK(scalar_value(t, f_beta_score(t, pn, gb)) == doctest::Approx(f_beta_score(p, gb)).epsilon(1e-14));
  const LossNodes n = loss_total(t, pn, pn, gh, gb, {2.0, 1e-6, 2});
  CHECK(scalar_value(t, n.total) == doctest::Approx(loss_total(p, p, gh, gb, {2.0, 1e-6, 2})).epsilon(1e-14));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(6);
  const Heatmap gh = random_grid(rng, 6, 6, 1, 0.0, 1.0);
  Heatmap gb(6, 6);
  for (double& v : gb.values()) v = bernoulli(rng, 0.4) ? 1.0 : 0.0;
  const std::vector<NamedGrid> params{{"p", random_grid(rng, 6, 6, 1, 0.05, 0.95)}};

  CHECK(grad_check([&](Tape& t, std::span<const NodeId> p) { return mse(t, p[0], gh); }, params).passed());
  CHECK(grad_check([&](Tape& t, std::span<const NodeId> p) { return sdc(t, p[0], gh); }, params).passed());
  CHECK(grad_check([&](Tape& t, std::span<const NodeId> p) { return loss_l1(t, p[0], gh); }, params).passed());
  CHECK(grad_check([&](Tape& t, std::span<const NodeId> p) { return f_beta_score(t, p[0], gb); }, params).passed());
  for (int variant : {1, 2}) {
    const LossConfig cfg{2.0, 1e-6, variant};
    const auto report = grad_check(
        [&](Tape& t, std::span<const NodeId> p) { return loss_total(t, p[0], p[1], gh, gb, cfg).total; },
        {params[0], {"q", random_grid(rng, 6, 6, 1, 0.05, 0.95)}});
    CHECK(report.passed());
  }
}
