#include "sgd/config.hpp"

#include <cmath>
#include <string>

#include "sgd/errors.hpp"

namespace sgd {

void GuidanceConfig::validate() {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (!(beta >= 0.0) || !finite(beta)) throw InputError("beta must be >= 0");
  if (!finite(lambda1) || !finite(lambda2) || !finite(w_focal) || !finite(w_moment) ||
      !finite(guidance_scale) || !finite(omega) || !finite(eta_ddim)) {
    throw InputError("guidance weights must be finite");
  }
  if (eta_ddim < 0.0) throw InputError("eta_ddim must be >= 0");
  if (!(tau > 0.0)) throw InputError("tau must be > 0");
  if (top_k < 1) throw InputError("top_k must be >= 1");
  if (k1 > k2) throw InputError("k1 must not exceed k2");
  if (anchor_factor < 1) throw InputError("anchor_factor must be >= 1");
  if (agg_resolutions.empty()) throw InputError("agg_resolutions must not be empty");
  if (agg_resolutions.size() != agg_weights.size()) {
    throw InputError("agg_weights must have one entry per resolution");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < agg_weights.size(); ++i) {
    if (agg_resolutions[i] < 1) throw InputError("agg_resolutions must be positive");
    if (!(agg_weights[i] >= 0.0) || !finite(agg_weights[i])) {
      throw InputError("agg_weights must be nonnegative");
    }
    total += agg_weights[i];
  }
  if (!(total > 0.0)) throw InputError("agg_weights must not all be zero");
  for (double& w : agg_weights) w /= total;
}

}  // namespace sgd
