#include "sgd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgd/errors.hpp"

namespace sgd {

namespace {

int token_class(const ToyWorld& world, const std::string& token) {
  try {
    return world.class_index(token);
  } catch (const InputError&) {
    throw InputError("scribble token '" + token + "' is not a class of the world");
  }
}

std::size_t mask_cells(const ScribbleSet& set) {
  std::size_t n = 0;
  for (const Scribble& s : set.scribbles) n += s.mask.count_set();
  return n;
}

}  // namespace

std::vector<int> scribble_condition(const ToyWorld& world, const ScribbleSet& scribbles) {
  std::vector<int> out;
  for (const Scribble& s : scribbles.scribbles) {
    for (const std::string& tok : s.tokens) out.push_back(token_class(world, tok));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TokenMaps token_maps(const ToyWorld& world, const CrossAttention& attention,
                     const ScribbleSet& scribbles) {
  TokenMaps maps;
  for (const Scribble& s : scribbles.scribbles) {
    for (const std::string& tok : s.tokens) {
      if (!maps.contains(tok)) maps.emplace(tok, attention.logits(token_class(world, tok)));
    }
  }
  return maps;
}

CrossLossTerms latent_loss(const ToyWorld& world, const Grid2D& x, double alpha,
                           const ScribbleSet& scribbles, const GuidanceConfig& cfg) {
  const std::vector<int> condition = scribble_condition(world, scribbles);
  const CrossAttention attention(world, x, alpha, condition);
  return cross_loss(token_maps(world, attention, scribbles), scribbles, cfg);
}

Grid2D latent_loss_gradient(const ToyWorld& world, const Grid2D& x, double alpha,
                            const ScribbleSet& scribbles, const GuidanceConfig& cfg,
                            CrossLossTerms* terms) {
  const std::vector<int> condition = scribble_condition(world, scribbles);
  const CrossAttention attention(world, x, alpha, condition);
  const TokenMaps maps = token_maps(world, attention, scribbles);
  if (terms) *terms = cross_loss(maps, scribbles, cfg);
  const TokenMaps upstream = grad_cross_loss(maps, scribbles, cfg);
  Grid2D grad(x.width(), x.height());
  for (const auto& [tok, g] : upstream) {
    grad += attention.latent_gradient(token_class(world, tok), g);
  }
  return grad;
}

SampleResult guided_sample(const ToyWorld& world, const ScribbleSet& scribbles,
                           const GuidanceConfig& cfg, const DiffusionSchedule& schedule, Rng& rng,
                           const SampleOptions& options) {
  scribbles.validate();
  const int n = world.resolution();
  if (scribbles.width != n || scribbles.height != n) {
    throw InputError("scribbles are " + std::to_string(scribbles.width) + "x" +
                     std::to_string(scribbles.height) + " but the world is " + std::to_string(n) +
                     "x" + std::to_string(n));
  }
  if (n % cfg.anchor_factor != 0) {
    throw InputError("anchor_factor must divide the world resolution");
  }
  const std::vector<int> condition = scribble_condition(world, scribbles);

  SampleResult result;
  result.final_masks = scribbles;
  const int anchors = n / cfg.anchor_factor;
  PropagationState regions =
      initial_propagation_state(scribbles, anchors, anchors, cfg.k1, cfg.k2);

  LatentState state{sample_gaussian(rng, n, n), schedule.timesteps().front()};
  if (options.record_trajectory) result.trajectory.push_back(state.x);

  const auto& steps = schedule.timesteps();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const int step = static_cast<int>(k) + 1;
    const double alpha = schedule.alpha(state.t);
    StepDiagnostics diag;
    diag.step = step;
    diag.t = state.t;
    diag.t_prev = schedule.previous(state.t);

    const Grid2D eps_c = model_epsilon(world, state.x, alpha, condition);
    const Grid2D eps_u = model_epsilon(world, state.x, alpha);
    DdimStep next = ddim_step(state, cfg_combine(eps_c, eps_u, cfg.omega), schedule, cfg.eta_ddim, rng);

    diag.region_cells = mask_cells(result.final_masks);
    if (cfg.guidance_scale != 0.0) {
      Grid2D grad =
          latent_loss_gradient(world, state.x, alpha, result.final_masks, cfg, &diag.loss);
      double sq = 0.0;
      for (double v : grad.values()) sq += v * v;
      diag.grad_norm = std::sqrt(sq);
      grad *= cfg.guidance_scale;
      next.next.x -= grad;
    } else {
      diag.loss = latent_loss(world, state.x, alpha, result.final_masks, cfg);
    }

    if (cfg.propagation && regions.active(step)) {
      const SelfAttentionStack stack = self_attention_stack(world, state.x, alpha, cfg, condition);
      const AttentionMatrix agg = aggregate_self_attention(stack, cfg, n);
      const AnchorGrid pooled = pool_anchors(agg, cfg.anchor_factor);
      std::vector<Merge> merged;
      regions = merge_neighbors(regions, pooled, cfg, &merged);
      result.final_masks = apply_regions(scribbles, regions);
      diag.merged = merged.size();
      diag.propagated = true;
    }
    diag.anchor_cells = regions.region_cells();

    if (!next.next.x.all_finite()) {
      throw NumericalError("latent became non-finite at inference step " + std::to_string(step) +
                           " (t=" + std::to_string(state.t) +
                           "); lower guidance_scale");
    }
    state = std::move(next.next);
    result.predicted_x0 = std::move(next.predicted_x0);
    if (options.record_trajectory) result.trajectory.push_back(state.x);
    result.steps.push_back(diag);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace sgd
