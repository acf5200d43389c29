#pragma once

#include <vector>

#include "sgd/grid.hpp"
#include "sgd/rng.hpp"

namespace sgd {

/// Linear beta schedule with cumulative alphas and the descending list of
/// timesteps visited by DDIM.
class DiffusionSchedule {
 public:
  DiffusionSchedule(int total_steps, double beta_start, double beta_end, int inference_steps);

  int total_steps() const noexcept { return total_steps_; }
  /// beta_t for t in [1, T].
  double beta(int t) const;
  /// alpha_t = prod_{s<=t} (1 - beta_s); alpha_0 = 1.
  double alpha(int t) const;
  /// Inference timesteps, descending (first entry is T).
  const std::vector<int>& timesteps() const noexcept { return timesteps_; }
  /// Next (smaller) inference timestep after t; 0 after the last one.
  int previous(int t) const;

 private:
  int total_steps_;
  std::vector<double> betas_;       // index t-1
  std::vector<double> alphas_cum_;  // index t, alphas_cum_[0] = 1
  std::vector<int> timesteps_;
};

DiffusionSchedule make_schedule(int total_steps, double beta_start, double beta_end,
                                int inference_steps);

struct LatentState {
  Grid2D x;
  int t = 0;
};

/// (1 + omega) * eps_cond - omega * eps_uncond
Grid2D cfg_combine(const Grid2D& eps_cond, const Grid2D& eps_uncond, double omega);

struct DdimStep {
  LatentState next;
  Grid2D predicted_x0;
};

/// One reverse step from state.t to schedule.previous(state.t):
///   x' = sqrt(a') x0_hat + sqrt(1 - a' - sigma^2) eps + sigma z,
///   x0_hat = (x - sqrt(1 - a) eps) / sqrt(a),  sigma = eta sqrt((1 - a') / a).
/// The noise draw is skipped entirely when sigma is zero.
DdimStep ddim_step(const LatentState& state, const Grid2D& eps_hat,
                   const DiffusionSchedule& schedule, double eta, Rng& rng);

}  // namespace sgd
