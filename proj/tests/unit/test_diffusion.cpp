#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "sgd/errors.hpp"
#include "sgd/experiment.hpp"
#include "sgd/sampler.hpp"
#include "sgd/schedule.hpp"

using namespace sgd;

namespace {

// Plain DDIM with the same predictions and no guidance shift.
Grid2D vanilla_ddim(const ToyWorld& world, const std::vector<int>& condition, double omega,
                    const DiffusionSchedule& schedule, std::uint64_t seed,
                    std::vector<Grid2D>* trajectory) {
  Rng rng(seed);
  const int n = world.resolution();
  Grid2D x = sample_gaussian(rng, n, n);
  trajectory->push_back(x);
  for (int t : schedule.timesteps()) {
    const double a = schedule.alpha(t);
    const double ap = schedule.alpha(schedule.previous(t));
    const Grid2D ec = model_epsilon(world, x, a, condition);
    const Grid2D eu = model_epsilon(world, x, a);
    Grid2D next(n, n);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = (1 + omega) * ec[i] - omega * eu[i];
      const double x0 = (x[i] - std::sqrt(1 - a) * e) / std::sqrt(a);
      next[i] = std::sqrt(ap) * x0 + std::sqrt(1 - ap) * e;
    }
    x = next;
    trajectory->push_back(x);
  }
  return x;
}

ToyWorld small_world() {
  WorldSpec spec;
  spec.resolution = 16;
  spec.sigma_major = 3.0;
  spec.sigma_minor = 1.0;
  spec.orientations_deg = {0, 60, 120};
  spec.center_grid = 2;
  spec.center_spacing = 3.0;
  return ToyWorld(spec);
}

GuidanceConfig small_cfg() {
  GuidanceConfig cfg;
  cfg.agg_resolutions = {4, 8, 16};
  cfg.agg_weights = {4, 8, 16};
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("linear schedule against the cumulative product") {
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    long double prod = 1.0L;
    for (int t = 1; t <= 1000; ++t) {
      const long double beta = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 999.0L;
      prod *= 1.0L - beta;
      CHECK(s.beta(t) == doctest::Approx(static_cast<double>(beta)).epsilon(1e-12));
    }
    CHECK(std::abs(s.alpha(1000) - static_cast<double>(prod)) <= 1e-7 * static_cast<double>(prod));
    CHECK(s.alpha(1000) == doctest::Approx(4.0e-5).epsilon(0.02));
    CHECK(s.alpha(0) == 1.0);
    for (int t = 1; t <= 1000; ++t) CHECK(s.alpha(t) < s.alpha(t - 1));
  }

  TEST_CASE("inference timesteps") {
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    REQUIRE(s.timesteps().size() == 50);
    CHECK(s.timesteps().front() == 1000);
    CHECK(s.timesteps().back() == 20);
    CHECK(s.previous(20) == 0);
    CHECK(s.previous(1000) == 980);
    const DiffusionSchedule all = make_schedule(10, 0.1, 0.2, 10);
    for (int i = 0; i < 10; ++i) CHECK(all.timesteps()[i] == 10 - i);
  }

  TEST_CASE("constant schedule is a closed-form power") {
    const DiffusionSchedule s = make_schedule(100, 0.01, 0.01, 10);
    for (int t = 0; t <= 100; ++t) CHECK(s.alpha(t) == doctest::Approx(std::pow(0.99, t)).epsilon(1e-13));
  }

  TEST_CASE("schedule validation") {
    CHECK_THROWS_AS(make_schedule(10, 1e-4, 0.02, 11), InputError);
    CHECK_THROWS_AS(make_schedule(10, 1e-4, 0.02, 0), InputError);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.02, 5), InputError);
    CHECK_THROWS_AS(make_schedule(10, 0.03, 0.02, 5), InputError);
    CHECK_THROWS_AS(make_schedule(10, 0.01, 1.0, 5), InputError);
  }

  TEST_CASE("classifier-free combination") {
    Rng rng(1);
    const Grid2D c = oracle::random_grid(rng, 4, 4);
    const Grid2D u = oracle::random_grid(rng, 4, 4);
    CHECK(cfg_combine(c, u, 0.0) == c);
    const Grid2D same = cfg_combine(c, c, 3.7);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(same[i] == doctest::Approx(c[i]).epsilon(1e-14));
    const Grid2D three = cfg_combine(Grid2D(3, 3, 1.0), Grid2D(3, 3, 0.0), 2.0);
    for (double v : three.values()) CHECK(v == 3.0);
    CHECK_THROWS_AS(cfg_combine(Grid2D(2, 2), Grid2D(3, 3), 1.0), InputError);
  }

  TEST_CASE("zero noise prediction rescales the latent") {
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    Rng rng(2);
    const Grid2D x = oracle::random_grid(rng, 5, 5);
    const DdimStep st = ddim_step({x, 500}, Grid2D(5, 5), s, 0.0, rng);
    CHECK(st.next.t == 480);
    const double k = std::sqrt(s.alpha(480) / s.alpha(500));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(st.next.x[i] == doctest::Approx(k * x[i]).epsilon(1e-14));
  }

  TEST_CASE("last step with the true noise returns x0") {
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    Rng rng(3);
    const Grid2D x0 = oracle::random_grid(rng, 6, 6);
    const Grid2D eps = oracle::random_grid(rng, 6, 6);
    const double a = s.alpha(20);
    Grid2D x(6, 6);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sqrt(a) * x0[i] + std::sqrt(1 - a) * eps[i];
    const DdimStep st = ddim_step({x, 20}, eps, s, 0.0, rng);
    CHECK(st.next.t == 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(st.next.x[i] == doctest::Approx(x0[i]).epsilon(1e-12));
      CHECK(st.predicted_x0[i] == st.next.x[i]);
    }
  }

  TEST_CASE("deterministic step matches an extended-precision transcription") {
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    Rng rng(4);
    for (int t : {1000, 760, 300, 20}) {
      const Grid2D x = oracle::random_grid(rng, 8, 8);
      const Grid2D e = oracle::random_grid(rng, 8, 8);
      const DdimStep st = ddim_step({x, t}, e, s, 0.0, rng);
      const long double a = s.alpha(t);
      const long double ap = s.alpha(s.previous(t));
      for (std::size_t i = 0; i < x.size(); ++i) {
        const long double x0 = (x[i] - std::sqrt(1.0L - a) * e[i]) / std::sqrt(a);
        const long double ref = std::sqrt(ap) * x0 + std::sqrt(1.0L - ap) * e[i];
        CHECK(std::abs(st.next.x[i] - static_cast<double>(ref)) <= 1e-12 * std::max(1.0L, std::abs(ref)));
      }
    }
  }

  TEST_CASE("stochastic step draws noise and rejects oversized eta") {
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    Rng a(5);
    Rng b(6);
    const Grid2D x(4, 4, 0.3);
    const DdimStep s1 = ddim_step({x, 500}, Grid2D(4, 4), s, 0.1, a);
    const DdimStep s2 = ddim_step({x, 500}, Grid2D(4, 4), s, 0.1, b);
    CHECK_FALSE(s1.next.x == s2.next.x);
    // alpha_0 = 1 makes sigma vanish on the final step, so no noise is drawn
    Rng c0(8);
    Rng c1(8);
    const DdimStep last = ddim_step({x, 20}, Grid2D(4, 4), s, 0.5, c0);
    CHECK(last.next.x == ddim_step({x, 20}, Grid2D(4, 4), s, 0.0, c1).next.x);
    CHECK(c0.normal() == c1.normal());
    Rng c(7);
    CHECK_THROWS_AS(ddim_step({x, 1000}, Grid2D(4, 4), s, 1.0, c), NumericalError);
  }

  TEST_CASE("guidance scale 0 reproduces vanilla DDIM exactly") {
    const ToyWorld world = small_world();
    GuidanceConfig cfg = small_cfg();
    cfg.guidance_scale = 0.0;
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    const ScribbleSet scribbles = oriented_scribbles(world, 3, 4.0);
    Rng rng(11);
    const SampleResult r = guided_sample(world, scribbles, cfg, s, rng, {true});
    std::vector<Grid2D> ref;
    vanilla_ddim(world, scribble_condition(world, scribbles), cfg.omega, s, 11, &ref);
    REQUIRE(r.trajectory.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK((r.trajectory[k] - ref[k]).max_abs() == 0.0);
  }

  TEST_CASE("same seed gives bit-identical latents") {
    const ToyWorld world = small_world();
    const GuidanceConfig cfg = small_cfg();
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 20);
    const ScribbleSet scribbles = oriented_scribbles(world, 5, 4.0);
    Rng a(3);
    Rng b(3);
    const SampleResult r1 = guided_sample(world, scribbles, cfg, s, a);
    const SampleResult r2 = guided_sample(world, scribbles, cfg, s, b);
    CHECK(r1.final_state.x == r2.final_state.x);
    Rng c(4);
    CHECK_FALSE(guided_sample(world, scribbles, cfg, s, c).final_state.x == r1.final_state.x);
  }

  TEST_CASE("loss regions never shrink and propagation only runs inside the window") {
    const ToyWorld world = small_world();
    GuidanceConfig cfg = small_cfg();
    cfg.k1 = 3;
    cfg.k2 = 9;
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 20);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      Rng rng(seed);
      const SampleResult r = guided_sample(world, oriented_scribbles(world, seed, 4.0), cfg, s, rng);
      REQUIRE(r.steps.size() == 20);
      for (std::size_t k = 0; k < r.steps.size(); ++k) {
        CHECK(r.steps[k].step == static_cast<int>(k) + 1);
        CHECK(r.steps[k].propagated == (r.steps[k].step >= 3 && r.steps[k].step <= 9));
        if (k > 0) {
          CHECK(r.steps[k].region_cells >= r.steps[k - 1].region_cells);
          CHECK(r.steps[k].anchor_cells >= r.steps[k - 1].anchor_cells);
        }
      }
    }
  }

  TEST_CASE("chained latent gradient matches finite differences") {
    const ToyWorld world = small_world();
    const GuidanceConfig cfg = small_cfg();
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 50);
    Rng rng(21);
    for (int t : {900, 600, 300}) {
      const double a = s.alpha(t);
      const std::size_t j = rng.below(world.template_count());
      Grid2D x = oracle::random_grid(rng, 16, 16, std::sqrt(1 - a));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += std::sqrt(a) * world.templates()[j].image[i];
      const ScribbleSet set = oracle::random_scribbles(rng, 16, 1, {"blob"});
      const Grid2D g = latent_loss_gradient(world, x, a, set, cfg);
      const Grid2D fd = oracle::central_difference(
          [&](const Grid2D& p) { return latent_loss(world, p, a, set, cfg).total; }, x);
      CHECK(oracle::relative_error(g, fd) <= 1e-3);
    }
  }

  TEST_CASE("sampler input validation") {
    const ToyWorld world = small_world();
    const GuidanceConfig cfg = small_cfg();
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 10);
    ScribbleSet wrong = oriented_scribbles(world, 0, 4.0);
    wrong.scribbles[0].tokens = {"cat"};
    Rng rng(1);
    CHECK_THROWS_AS(guided_sample(world, wrong, cfg, s, rng), InputError);
    ScribbleSet big = oriented_scribbles(ToyWorld(WorldSpec{}), 0);
    CHECK_THROWS_AS(guided_sample(world, big, cfg, s, rng), InputError);
  }

  TEST_CASE("runaway guidance aborts with a numerical error") {
    const ToyWorld world = small_world();
    GuidanceConfig cfg = small_cfg();
    cfg.guidance_scale = 1e308;
    const DiffusionSchedule s = make_schedule(1000, 1e-4, 0.02, 10);
    Rng rng(1);
    CHECK_THROWS_AS(guided_sample(world, oriented_scribbles(world, 0, 4.0), cfg, s, rng), NumericalError);
  }
}
