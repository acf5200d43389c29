#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "sgd/attention.hpp"
#include "sgd/errors.hpp"

using namespace sgd;

namespace {

// Per-cell focal term written with plain logs.
long double focal_cell(long double a, long double m, long double alpha, long double beta) {
  const long double p = 1.0L / (1.0L + std::exp(-a));
  const long double bce = -(m * std::log(p) + (1.0L - m) * std::log(1.0L - p));
  return std::pow(1.0L - p, beta) * (alpha * m + (1.0L - alpha) * (1.0L - m)) * bce;
}

Grid2D cell(double v) { return Grid2D(1, 1, v); }

}  // namespace

TEST_SUITE("attention") {
  TEST_CASE("focal loss scalar examples") {
    const double confident = focal_loss(cell(10.0), cell(1.0), 0.25, 2.0);
    CHECK(confident == doctest::Approx(2.3e-14).epsilon(0.02));
    CHECK(confident == doctest::Approx(static_cast<double>(focal_cell(10, 1, 0.25, 2))).epsilon(1e-9));
    const double neutral = focal_loss(cell(0.0), cell(0.0), 0.25, 2.0);
    CHECK(neutral == doctest::Approx(0.25 * 0.75 * std::log(2.0)).epsilon(1e-14));
    CHECK(neutral == doctest::Approx(0.1300).epsilon(1e-3));
  }

  TEST_CASE("focal loss matches the log form on random maps") {
    Rng rng(3);
    for (int k = 0; k < 10; ++k) {
      const Grid2D a = oracle::random_grid(rng, 9, 7, 4.0);
      Grid2D m(9, 7);
      for (double& v : m.values()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
      long double expected = 0;
      for (std::size_t i = 0; i < a.size(); ++i) expected += focal_cell(a[i], m[i], 0.25, 2.0);
      expected /= a.size();
      CHECK(focal_loss(a, m, 0.25, 2.0) == doctest::Approx(static_cast<double>(expected)).epsilon(1e-12));
    }
  }

  TEST_CASE("focal loss is nonnegative and finite for extreme logits") {
    Rng rng(6);
    for (int k = 0; k < 100; ++k) {
      const Grid2D a = oracle::random_grid(rng, 4, 4, 200.0);
      Grid2D m(4, 4);
      for (double& v : m.values()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
      const double l = focal_loss(a, m, 0.25, 2.0);
      CHECK(l >= 0.0);
      CHECK(std::isfinite(l));
      CHECK(grad_focal_loss(a, m, 0.25, 2.0).all_finite());
    }
  }

  TEST_CASE("focal loss rejects shape mismatch") {
    CHECK_THROWS_AS(focal_loss(Grid2D(2, 2), Grid2D(3, 2), 0.25, 2.0), InputError);
    CHECK_THROWS_AS(grad_focal_loss(Grid2D(2, 2), Grid2D(3, 2), 0.25, 2.0), InputError);
  }

  TEST_CASE("beta 0 and alpha 0.5 give half the BCE-with-logits gradient") {
    Rng rng(10);
    const Grid2D a = oracle::random_grid(rng, 6, 6, 3.0);
    Grid2D m(6, 6);
    for (double& v : m.values()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const Grid2D g = grad_focal_loss(a, m, 0.5, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double bce_grad = (1.0 / (1.0 + std::exp(-a[i])) - m[i]) / a.size();
      CHECK(g[i] == doctest::Approx(0.5 * bce_grad).epsilon(1e-12));
    }
  }

  TEST_CASE("saturated positive cell has vanishing gradient") {
    CHECK(std::abs(grad_focal_loss(cell(50.0), cell(1.0), 0.25, 2.0)[0]) < 1e-60);
  }

  TEST_CASE("raising a positive cell never increases the loss") {
    for (double a = -30.0; a <= 30.0; a += 0.25) {
      CHECK(grad_focal_loss(cell(a), cell(1.0), 0.25, 2.0)[0] <= 0.0);
      CHECK(focal_loss(cell(a + 0.25), cell(1.0), 0.25, 2.0) <= focal_loss(cell(a), cell(1.0), 0.25, 2.0));
    }
  }

  TEST_CASE("lowering a negative cell never increases the loss while sigma is below 1 - exp(-1/beta)") {
    for (const double beta : {0.5, 1.0, 2.0, 3.0}) {
      // (1 - sigma)^beta on negatives makes the loss fall again for large
      // logits; monotonicity holds up to softplus(a) = 1 / beta.
      const double limit = std::log(std::exp(1.0 / beta) - 1.0);
      for (double a = -30.0; a <= limit; a += 0.01) {
        CHECK(grad_focal_loss(cell(a), cell(0.0), 0.25, beta)[0] >= 0.0);
      }
      CHECK(grad_focal_loss(cell(limit + 1.0), cell(0.0), 0.25, beta)[0] < 0.0);
    }
  }

  TEST_CASE("focal gradient matches finite differences") {
    Rng rng(14);
    for (int k = 0; k < 10; ++k) {
      const Grid2D a = oracle::random_grid(rng, 16, 16, 3.0);
      Grid2D m(16, 16);
      for (double& v : m.values()) v = rng.uniform() < 0.2 ? 1.0 : 0.0;
      const Grid2D fd = oracle::central_difference(
          [&](const Grid2D& p) { return focal_loss(p, m, 0.25, 2.0); }, a);
      CHECK(oracle::relative_error(grad_focal_loss(a, m, 0.25, 2.0), fd) <= 1e-4);
    }
  }

  TEST_CASE("cross loss is the weighted sum of its parts") {
    Rng rng(15);
    GuidanceConfig cfg;
    cfg.validate();
    const ScribbleSet set = oracle::random_scribbles(rng, 16, 2, {"a", "b"});
    TokenMaps maps{{"a", oracle::random_grid(rng, 16, 16, 2.0)}, {"b", oracle::random_grid(rng, 16, 16, 2.0)}};
    const CrossLossTerms t = cross_loss(maps, set, cfg);
    CHECK(t.total == 5.0 * t.focal + 3.0 * t.moment);
    CHECK(t.moment == 0.6 * t.centroid + 0.6 * t.central);
    CHECK(t.focal == focal_term(maps, set, cfg.alpha, cfg.beta));
  }

  TEST_CASE("weighted sum example") {
    // w_focal * 0.1 + w_moment * 0.2 with the default 5:3 weights.
    GuidanceConfig cfg;
    CHECK(cfg.w_focal * 0.1 + cfg.w_moment * 0.2 == doctest::Approx(1.1));
    CHECK(cfg.alpha == 0.25);
    CHECK(cfg.beta == 2.0);
    CHECK(cfg.lambda1 == 0.6);
    CHECK(cfg.lambda2 == 0.6);
  }

  TEST_CASE("focal term averages tokens then scribbles") {
    Grid2D m1(4, 4);
    m1.at(1, 1) = 1.0;
    Grid2D m2(4, 4);
    m2.at(2, 2) = 1.0;
    m2.at(3, 2) = 1.0;
    ScribbleSet set{4, 4, {}};
    set.scribbles.push_back({{}, m1, {"a", "b"}});
    set.scribbles.push_back({{}, m2, {"a"}});
    Rng rng(2);
    TokenMaps maps{{"a", oracle::random_grid(rng, 4, 4)}, {"b", oracle::random_grid(rng, 4, 4)}};
    const double expected =
        0.5 * (0.5 * (focal_loss(maps.at("a"), m1, 0.25, 2.0) + focal_loss(maps.at("b"), m1, 0.25, 2.0)) +
               focal_loss(maps.at("a"), m2, 0.25, 2.0));
    CHECK(focal_term(maps, set, 0.25, 2.0) == doctest::Approx(expected).epsilon(1e-14));
  }

  TEST_CASE("cross loss gradient matches finite differences on random instances") {
    Rng rng(16);
    GuidanceConfig cfg;
    cfg.validate();
    for (int k = 0; k < 20; ++k) {
      const ScribbleSet set = oracle::random_scribbles(rng, 16, 1 + static_cast<int>(rng.below(2)), {"a", "b"});
      TokenMaps maps{{"a", oracle::random_grid(rng, 16, 16, 3.0)}, {"b", oracle::random_grid(rng, 16, 16, 3.0)}};
      const TokenMaps g = grad_cross_loss(maps, set, cfg);
      for (const auto& [tok, logits] : maps) {
        const Grid2D fd = oracle::central_difference(
            [&](const Grid2D& p) {
              TokenMaps probe = maps;
              probe.at(tok) = p;
              return cross_loss(probe, set, cfg).total;
            },
            logits);
        const Grid2D analytic = g.contains(tok) ? g.at(tok) : Grid2D(16, 16);
        CHECK(oracle::relative_error(analytic, fd) <= 1e-4);
      }
    }
  }

  TEST_CASE("config validation") {
    GuidanceConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.agg_weights[0] + cfg.agg_weights[1] + cfg.agg_weights[2] == doctest::Approx(1.0));
    GuidanceConfig bad = cfg;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cfg;
    bad.k1 = 20;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cfg;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cfg;
    bad.top_k = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cfg;
    bad.agg_weights = {1.0};
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = cfg;
    bad.agg_weights = {1.0, -1.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), InputError);
  }
}
