#include "sgd/moments.hpp"

#include <cmath>
#include <numbers>

#include "sgd/errors.hpp"

namespace sgd {

MomentSummary moment_summary(const Grid2D& intensity) {
  if (intensity.empty()) throw InputError("moment_summary: empty grid");
  double m00 = 0, m10 = 0, m01 = 0, m20 = 0, m02 = 0, m11 = 0;
  for (int y = 0; y < intensity.height(); ++y) {
    for (int x = 0; x < intensity.width(); ++x) {
      const double v = intensity.at(x, y);
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InputError("moment_summary: intensities must be finite and nonnegative");
      }
      m00 += v;
      m10 += x * v;
      m01 += y * v;
      m20 += static_cast<double>(x) * x * v;
      m02 += static_cast<double>(y) * y * v;
      m11 += static_cast<double>(x) * y * v;
    }
  }
  if (!(m00 > 0.0)) throw InputError("moment_summary: zero total mass");

  MomentSummary s;
  s.m00 = m00;
  s.m10 = m10;
  s.m01 = m01;
  s.centroid = {m10 / m00, m01 / m00};
  const double cx = s.centroid.x;
  const double cy = s.centroid.y;
  // Second pass about the centroid: the m_pq/m00 - xbar^2 form cancels badly.
  double c20 = 0, c02 = 0, c11 = 0;
  for (int y = 0; y < intensity.height(); ++y) {
    for (int x = 0; x < intensity.width(); ++x) {
      const double v = intensity.at(x, y);
      const double dx = x - cx;
      const double dy = y - cy;
      c20 += dx * dx * v;
      c02 += dy * dy * v;
      c11 += dx * dy * v;
    }
  }
  s.mu20 = c20 / m00;
  s.mu02 = c02 / m00;
  s.mu11 = c11 / m00;
  s.theta = 0.5 * std::atan2(2.0 * s.mu11, s.mu20 - s.mu02);
  const double gap = std::hypot(s.mu20 - s.mu02, 2.0 * s.mu11);
  s.isotropic = gap <= kIsotropyEpsilon * (s.mu20 + s.mu02);
  return s;
}

double axis_difference(double theta_a, double theta_b) {
  constexpr double pi = std::numbers::pi;
  double d = std::fmod(theta_a - theta_b + 0.5 * pi, pi);
  if (d < 0.0) d += pi;
  return d - 0.5 * pi;
}

double logistic(double a) noexcept {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

Grid2D logistic(const Grid2D& logits) {
  Grid2D out = logits;
  for (double& v : out.values()) v = logistic(v);
  return out;
}

void check_token_maps(const TokenMaps& attn, const ScribbleSet& scribbles) {
  scribbles.validate();
  for (const Scribble& s : scribbles.scribbles) {
    for (const std::string& token : s.tokens) {
      auto it = attn.find(token);
      if (it == attn.end()) throw InputError("no attention map for token '" + token + "'");
      if (!it->second.same_shape(s.mask)) {
        throw InputError("attention map for token '" + token +
                         "' does not match the scribble resolution");
      }
    }
  }
}

namespace {

struct Scale {
  double x2;  // squared coordinate scale for the centroid term
  double y2;
};

Scale centroid_scale(CentroidUnits units, const Grid2D& g) {
  if (units == CentroidUnits::cells) return {1.0, 1.0};
  const double ux = 1.0 / g.width();
  const double uy = 1.0 / g.height();
  return {ux * ux, uy * uy};
}

double centroid_distance(const MomentSummary& a, const MomentSummary& s, Scale scale) {
  const double dx = a.centroid.x - s.centroid.x;
  const double dy = a.centroid.y - s.centroid.y;
  return scale.x2 * dx * dx + scale.y2 * dy * dy;
}

bool has_orientation(const MomentSummary& a, const MomentSummary& s) {
  return !a.isotropic && !s.isotropic;
}

// Accumulates `weight * d(term)/d(logit)` into `grad` for one (scribble, token)
// pair. `p` is the logistic of the token map and `a` its moment summary.
void accumulate_pair_gradient(const Grid2D& p, const MomentSummary& a, const MomentSummary& s,
                              Scale scale, double w_centroid, double w_central, Grid2D& grad) {
  const double inv_m00 = 1.0 / a.m00;
  const double ex = 2.0 * scale.x2 * (a.centroid.x - s.centroid.x) * w_centroid;
  const double ey = 2.0 * scale.y2 * (a.centroid.y - s.centroid.y) * w_centroid;

  // theta = atan2(Y, X) / 2 with Y = 2 mu11, X = mu20 - mu02.
  double k_y = 0.0;
  double k_x = 0.0;
  if (w_central != 0.0 && has_orientation(a, s)) {
    const double delta = axis_difference(a.theta, s.theta);
    const double sign = delta > 0.0 ? 1.0 : (delta < 0.0 ? -1.0 : 0.0);
    const double big_y = 2.0 * a.mu11;
    const double big_x = a.mu20 - a.mu02;
    const double r2 = big_x * big_x + big_y * big_y;
    k_y = w_central * sign * 0.5 * big_x / r2;
    k_x = -w_central * sign * 0.5 * big_y / r2;
  }

  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      const double dx = x - a.centroid.x;
      const double dy = y - a.centroid.y;
      double dl_dp = (ex * dx + ey * dy) * inv_m00;
      if (k_x != 0.0 || k_y != 0.0) {
        const double d_mu20 = (dx * dx - a.mu20) * inv_m00;
        const double d_mu02 = (dy * dy - a.mu02) * inv_m00;
        const double d_mu11 = (dx * dy - a.mu11) * inv_m00;
        dl_dp += k_y * 2.0 * d_mu11 + k_x * (d_mu20 - d_mu02);
      }
      const double pv = p.at(x, y);
      grad.at(x, y) += dl_dp * pv * (1.0 - pv);
    }
  }
}

}  // namespace

MomentLossTerms moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                            const MomentLossOptions& options) {
  check_token_maps(attn, scribbles);
  const double n_scribbles = static_cast<double>(scribbles.size());
  MomentLossTerms out;
  std::map<std::string, MomentSummary> cache;
  for (const Scribble& s : scribbles.scribbles) {
    const MomentSummary ms = moment_summary(s.mask);
    const Scale scale = centroid_scale(options.units, s.mask);
    double centroid = 0.0;
    double central = 0.0;
    for (const std::string& token : s.tokens) {
      auto [it, fresh] = cache.try_emplace(token);
      if (fresh) it->second = moment_summary(logistic(attn.at(token)));
      const MomentSummary& ma = it->second;
      centroid += centroid_distance(ma, ms, scale);
      if (has_orientation(ma, ms)) central += std::abs(axis_difference(ma.theta, ms.theta));
    }
    const double n_tokens = static_cast<double>(s.tokens.size());
    out.centroid += centroid / n_tokens;
    out.central += central / n_tokens;
  }
  out.centroid /= n_scribbles;
  out.central /= 2.0 * std::numbers::pi * n_scribbles;
  out.total = options.lambda1 * out.centroid + options.lambda2 * out.central;
  return out;
}

MomentLossTerms moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles, double lambda1,
                            double lambda2) {
  return moment_loss(attn, scribbles, MomentLossOptions{lambda1, lambda2});
}

TokenMaps grad_moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                           const MomentLossOptions& options) {
  check_token_maps(attn, scribbles);
  const double n_scribbles = static_cast<double>(scribbles.size());
  TokenMaps grads;
  std::map<std::string, std::pair<Grid2D, MomentSummary>> cache;
  for (const Scribble& s : scribbles.scribbles) {
    const MomentSummary ms = moment_summary(s.mask);
    const Scale scale = centroid_scale(options.units, s.mask);
    const double n_tokens = static_cast<double>(s.tokens.size());
    const double w_centroid = options.lambda1 / (n_scribbles * n_tokens);
    const double w_central =
        options.lambda2 / (2.0 * std::numbers::pi * n_scribbles * n_tokens);
    for (const std::string& token : s.tokens) {
      auto [it, fresh] = cache.try_emplace(token);
      if (fresh) {
        Grid2D p = logistic(attn.at(token));
        MomentSummary summary = moment_summary(p);
        it->second = {std::move(p), summary};
      }
      auto [g, inserted] = grads.try_emplace(token, s.mask.width(), s.mask.height());
      accumulate_pair_gradient(it->second.first, it->second.second, ms, scale, w_centroid,
                               w_central, g->second);
    }
  }
  return grads;
}

TokenMaps grad_moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles, double lambda1,
                           double lambda2) {
  return grad_moment_loss(attn, scribbles, MomentLossOptions{lambda1, lambda2});
}

}  // namespace sgd
