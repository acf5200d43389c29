#pragma once

#include <vector>

#include "sgd/moments.hpp"

namespace sgd {

/// Every scalar the losses, the sampler and propagation read.
struct GuidanceConfig {
  // focal loss
  double alpha = 0.25;
  double beta = 2.0;
  // moment loss
  double lambda1 = 0.6;
  double lambda2 = 0.6;
  CentroidUnits centroid_units = CentroidUnits::normalized;
  // focal : moment weighting (absolute multipliers)
  double w_focal = 5.0;
  double w_moment = 3.0;
  // sampler
  double guidance_scale = 1.0;
  double omega = 1.0;
  double eta_ddim = 0.0;
  // propagation
  bool propagation = true;
  double tau = 1e-3;
  int top_k = 20;
  int k1 = 5;
  int k2 = 15;
  std::vector<int> agg_resolutions{8, 16, 32};
  std::vector<double> agg_weights{8.0, 16.0, 32.0};
  int anchor_factor = 2;

  /// Throws InputError on a violated invariant and rescales agg_weights to
  /// sum to 1.
  void validate();

  MomentLossOptions moment_options() const { return {lambda1, lambda2, centroid_units}; }
};

}  // namespace sgd
