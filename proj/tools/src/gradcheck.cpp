#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <string>

#include "sgd/attention.hpp"
#include "sgd/moments.hpp"
#include "sgd/rng.hpp"
#include "sgd/run_config.hpp"
#include "sgd/sampler.hpp"
#include "sgd/toyworld.hpp"
#include "sgd_cli/commands.hpp"

namespace sgd::cli {

namespace {

constexpr double kStep = 1e-4;
// Below this gradient magnitude the central difference is dominated by
// rounding in the loss, so errors are measured against the floor instead.
constexpr double kGradientFloor = 1e-6;

ScribbleSet random_scribbles(Rng& rng, int n, const std::vector<std::string>& classes) {
  ScribbleSet set;
  set.width = n;
  set.height = n;
  const int count = 1 + static_cast<int>(rng.below(2));
  while (static_cast<int>(set.size()) < count) {
    ScribbleGeometry g;
    const int points = 2 + static_cast<int>(rng.below(3));
    for (int i = 0; i < points; ++i) {
      g.points.push_back({1.0 + rng.uniform() * (n - 3), 1.0 + rng.uniform() * (n - 3)});
    }
    g.thickness = 1 + static_cast<int>(rng.below(2));
    const std::string& token = classes[rng.below(classes.size())];
    try {
      set.scribbles.push_back(make_scribble(std::move(g), {token}, n, n));
    } catch (const InputError&) {
      // degenerate stroke; draw another
    }
  }
  return set;
}

// max |analytic - fd| / max(max |fd|, floor)
double relative_error(std::span<const double> analytic, std::span<const double> fd) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - fd[i]));
    scale = std::max(scale, std::abs(fd[i]));
  }
  return diff / std::max(scale, kGradientFloor);
}

struct Component {
  std::string name;
  std::function<double(const TokenMaps&)> value;
  std::function<TokenMaps(const TokenMaps&)> gradient;
};

double check_attention(const Component& c, const TokenMaps& maps, bool corrupt) {
  TokenMaps analytic = c.gradient(maps);
  double worst = 0.0;
  for (const auto& [token, logits] : maps) {
    TokenMaps probe = maps;
    Grid2D& cell = probe.at(token);
    Grid2D fd(logits.width(), logits.height());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      cell[i] = logits[i] + kStep;
      const double up = c.value(probe);
      cell[i] = logits[i] - kStep;
      const double down = c.value(probe);
      cell[i] = logits[i];
      fd[i] = (up - down) / (2.0 * kStep);
    }
    Grid2D a = analytic.contains(token) ? analytic.at(token) : Grid2D(fd.width(), fd.height());
    if (corrupt) a *= 1.01;
    worst = std::max(worst, relative_error(a.values(), fd.values()));
  }
  return worst;
}

}  // namespace

int run_gradcheck(const GradcheckArgs& args, std::ostream& out) {
  RunConfig config = load_run_config(args.config);
  const ToyWorld world(config.world);
  const DiffusionSchedule schedule = config.schedule.build();
  const GuidanceConfig& cfg = config.guidance;
  const int n = world.resolution();
  Rng rng(config.seeds.front());

  const MomentLossOptions centroid_only{1.0, 0.0, cfg.centroid_units};
  const MomentLossOptions central_only{0.0, 1.0, cfg.centroid_units};
  std::vector<Component> components;
  ScribbleSet current;
  components.push_back({"focal",
                        [&](const TokenMaps& m) { return focal_term(m, current, cfg.alpha, cfg.beta); },
                        [&](const TokenMaps& m) {
                          return grad_focal_term(m, current, cfg.alpha, cfg.beta);
                        }});
  components.push_back({"centroid",
                        [&](const TokenMaps& m) { return moment_loss(m, current, centroid_only).total; },
                        [&](const TokenMaps& m) { return grad_moment_loss(m, current, centroid_only); }});
  components.push_back({"central",
                        [&](const TokenMaps& m) { return moment_loss(m, current, central_only).total; },
                        [&](const TokenMaps& m) { return grad_moment_loss(m, current, central_only); }});
  components.push_back({"total",
                        [&](const TokenMaps& m) { return cross_loss(m, current, cfg).total; },
                        [&](const TokenMaps& m) { return grad_cross_loss(m, current, cfg); }});

  std::vector<double> worst(components.size(), 0.0);
  for (int k = 0; k < args.cases; ++k) {
    current = random_scribbles(rng, n, world.classes());
    TokenMaps maps;
    for (const Scribble& s : current.scribbles) {
      Grid2D logits = sample_gaussian(rng, n, n);
      logits *= 3.0;
      maps.try_emplace(s.tokens.front(), std::move(logits));
    }
    for (std::size_t c = 0; c < components.size(); ++c) {
      worst[c] = std::max(worst[c], check_attention(components[c], maps, args.corrupt_gradient));
    }
  }

  // Latent space: noisy versions of random templates at spread-out timesteps.
  double latent_worst = 0.0;
  const auto& steps = schedule.timesteps();
  const int latent_cases = std::max(1, args.cases / 4);
  for (int k = 0; k < latent_cases; ++k) {
    const int t = steps[(steps.size() - 1) * static_cast<std::size_t>(k + 1) /
                        static_cast<std::size_t>(latent_cases + 1)];
    const double alpha = schedule.alpha(t);
    const std::size_t j = rng.below(world.template_count());
    Grid2D x = sample_gaussian(rng, n, n);
    x *= std::sqrt(1.0 - alpha);
    Grid2D mean = world.templates()[j].image;
    mean *= std::sqrt(alpha);
    x += mean;
    current = random_scribbles(rng, n, world.classes());
    Grid2D analytic = latent_loss_gradient(world, x, alpha, current, cfg);
    if (args.corrupt_gradient) analytic *= 1.01;
    Grid2D fd(n, n);
    Grid2D probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      probe[i] = x[i] + kStep;
      const double up = latent_loss(world, probe, alpha, current, cfg).total;
      probe[i] = x[i] - kStep;
      const double down = latent_loss(world, probe, alpha, current, cfg).total;
      probe[i] = x[i];
      fd[i] = (up - down) / (2.0 * kStep);
    }
    latent_worst = std::max(latent_worst, relative_error(analytic.values(), fd.values()));
  }

  bool ok = true;
  out << std::scientific << std::setprecision(3);
  out << "gradcheck: " << args.cases << " attention cases, " << latent_cases
      << " latent cases, step " << kStep << "\n";
  for (std::size_t c = 0; c < components.size(); ++c) {
    const bool pass = worst[c] <= args.attention_tolerance;
    ok = ok && pass;
    out << "  attention " << std::left << std::setw(9) << components[c].name
        << " max rel err " << worst[c] << "  (tol " << args.attention_tolerance << ") "
        << (pass ? "ok" : "FAIL") << "\n";
  }
  const bool latent_pass = latent_worst <= args.latent_tolerance;
  ok = ok && latent_pass;
  out << "  latent    " << std::left << std::setw(9) << "total"
      << " max rel err " << latent_worst << "  (tol " << args.latent_tolerance << ") "
      << (latent_pass ? "ok" : "FAIL") << "\n";
  out << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kCheckFailed;
}

}  // namespace sgd::cli
