#include "sgd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgd/errors.hpp"

namespace sgd {

DiffusionSchedule::DiffusionSchedule(int total_steps, double beta_start, double beta_end,
                                     int inference_steps)
    : total_steps_(total_steps) {
  if (inference_steps < 1 || total_steps < inference_steps) {
    throw InputError("schedule needs T >= inference_steps >= 1");
  }
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw InputError("schedule needs 0 < beta_start <= beta_end < 1");
  }
  betas_.resize(static_cast<std::size_t>(total_steps));
  alphas_cum_.resize(static_cast<std::size_t>(total_steps) + 1);
  alphas_cum_[0] = 1.0;
  for (int t = 1; t <= total_steps; ++t) {
    const double frac = total_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (total_steps - 1);
    const double b = beta_start == beta_end ? beta_start : beta_start + (beta_end - beta_start) * frac;
    betas_[t - 1] = b;
    alphas_cum_[t] = alphas_cum_[t - 1] * (1.0 - b);
  }
  for (int k = inference_steps; k >= 1; --k) {
    timesteps_.push_back(static_cast<int>(
        (static_cast<long long>(k) * total_steps) / inference_steps));
  }
}

double DiffusionSchedule::beta(int t) const {
  if (t < 1 || t > total_steps_) throw InputError("beta: timestep out of range");
  return betas_[t - 1];
}

double DiffusionSchedule::alpha(int t) const {
  if (t < 0 || t > total_steps_) throw InputError("alpha: timestep out of range");
  return alphas_cum_[t];
}

int DiffusionSchedule::previous(int t) const {
  auto it = std::find(timesteps_.begin(), timesteps_.end(), t);
  if (it == timesteps_.end()) {
    throw InputError("timestep " + std::to_string(t) + " is not an inference step");
  }
  ++it;
  return it == timesteps_.end() ? 0 : *it;
}

DiffusionSchedule make_schedule(int total_steps, double beta_start, double beta_end,
                                int inference_steps) {
  return DiffusionSchedule(total_steps, beta_start, beta_end, inference_steps);
}

Grid2D cfg_combine(const Grid2D& eps_cond, const Grid2D& eps_uncond, double omega) {
  if (!eps_cond.same_shape(eps_uncond) || eps_cond.empty()) {
    throw InputError("cfg_combine: shape mismatch");
  }
  Grid2D out(eps_cond.width(), eps_cond.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 + omega) * eps_cond[i] - omega * eps_uncond[i];
  }
  return out;
}

DdimStep ddim_step(const LatentState& state, const Grid2D& eps_hat,
                   const DiffusionSchedule& schedule, double eta, Rng& rng) {
  if (!state.x.same_shape(eps_hat) || state.x.empty()) {
    throw InputError("ddim_step: latent and noise prediction differ in shape");
  }
  const int t_prev = schedule.previous(state.t);
  const double a = schedule.alpha(state.t);
  const double a_prev = schedule.alpha(t_prev);
  if (!(a > 0.0)) throw NumericalError("ddim_step: alpha_t is zero");

  const double sigma = eta * std::sqrt((1.0 - a_prev) / a);
  const double dir2 = 1.0 - a_prev - sigma * sigma;
  if (dir2 < 0.0) {
    throw NumericalError("ddim_step: eta too large at t=" + std::to_string(state.t) +
                         " (sigma^2 exceeds 1 - alpha_prev)");
  }
  const double sqrt_a = std::sqrt(a);
  const double sqrt_1ma = std::sqrt(1.0 - a);
  const double sqrt_ap = std::sqrt(a_prev);
  const double dir = std::sqrt(dir2);

  DdimStep out{{Grid2D(state.x.width(), state.x.height()), t_prev},
               Grid2D(state.x.width(), state.x.height())};
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    const double x0 = (state.x[i] - sqrt_1ma * eps_hat[i]) / sqrt_a;
    out.predicted_x0[i] = x0;
    out.next.x[i] = sqrt_ap * x0 + dir * eps_hat[i];
  }
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < state.x.size(); ++i) out.next.x[i] += sigma * rng.normal();
  }
  return out;
}

}  // namespace sgd
