#pragma once

#include <cstddef>
#include <vector>

#include "sgd/attention.hpp"
#include "sgd/config.hpp"
#include "sgd/grid.hpp"
#include "sgd/propagation.hpp"
#include "sgd/rng.hpp"
#include "sgd/schedule.hpp"
#include "sgd/scribble.hpp"
#include "sgd/toyworld.hpp"

namespace sgd {

struct StepDiagnostics {
  int step = 0;  // 1-based inference-step index
  int t = 0;
  int t_prev = 0;
  CrossLossTerms loss;
  double grad_norm = 0.0;
  /// Set cells over all loss masks when the loss was evaluated.
  std::size_t region_cells = 0;
  /// Anchor cells over all propagation regions after this step.
  std::size_t anchor_cells = 0;
  std::size_t merged = 0;
  bool propagated = false;
};

struct SampleOptions {
  bool record_trajectory = false;
};

struct SampleResult {
  LatentState final_state;
  Grid2D predicted_x0;  // from the last DDIM step
  std::vector<StepDiagnostics> steps;
  /// x_T followed by the latent after every step (when recorded).
  std::vector<Grid2D> trajectory;
  ScribbleSet final_masks;
};

/// Class indices named by the scribble tokens. Throws InputError for tokens
/// outside the world's vocabulary.
std::vector<int> scribble_condition(const ToyWorld& world, const ScribbleSet& scribbles);

/// Cross-attention logits for every token used by the scribbles.
TokenMaps token_maps(const ToyWorld& world, const CrossAttention& attention,
                     const ScribbleSet& scribbles);

/// Gradient of the guidance loss with respect to the latent x at timestep
/// alpha, chained through the world's cross-attention maps.
Grid2D latent_loss_gradient(const ToyWorld& world, const Grid2D& x, double alpha,
                            const ScribbleSet& scribbles, const GuidanceConfig& cfg,
                            CrossLossTerms* terms = nullptr);
/// The loss that latent_loss_gradient differentiates.
CrossLossTerms latent_loss(const ToyWorld& world, const Grid2D& x, double alpha,
                           const ScribbleSet& scribbles, const GuidanceConfig& cfg);

/// Guided DDIM sampling. x_T is drawn from `rng`, then every step combines
/// conditional and unconditional predictions, takes a DDIM step and shifts
/// the result by -guidance_scale times the loss gradient at the current
/// latent. Inside [k1, k2] the scribble regions grow by one propagation
/// round after the loss is evaluated. Throws NumericalError if the latent
/// stops being finite.
SampleResult guided_sample(const ToyWorld& world, const ScribbleSet& scribbles,
                           const GuidanceConfig& cfg, const DiffusionSchedule& schedule, Rng& rng,
                           const SampleOptions& options = {});

}  // namespace sgd
