#include "sgd/attention.hpp"

#include <cmath>

#include "sgd/errors.hpp"

namespace sgd {

namespace {

// log(1 + e^a) without overflow.
double softplus(double a) noexcept {
  return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

void check_same_shape(const Grid2D& logits, const Grid2D& mask) {
  if (logits.empty() || !logits.same_shape(mask)) {
    throw InputError("focal loss: logits and mask dimensions differ");
  }
}

}  // namespace

double focal_loss(const Grid2D& logits, const Grid2D& mask, double alpha, double beta) {
  check_same_shape(logits, mask);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double a = logits[i];
    const double m = mask[i];
    const double q = logistic(-a);  // 1 - sigma(a)
    const double bce = m * softplus(-a) + (1.0 - m) * softplus(a);
    const double weight = alpha * m + (1.0 - alpha) * (1.0 - m);
    total += std::pow(q, beta) * weight * bce;
  }
  return total / static_cast<double>(logits.size());
}

Grid2D grad_focal_loss(const Grid2D& logits, const Grid2D& mask, double alpha, double beta) {
  check_same_shape(logits, mask);
  Grid2D grad(logits.width(), logits.height());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double a = logits[i];
    const double m = mask[i];
    const double p = logistic(a);
    const double q = logistic(-a);
    const double bce = m * softplus(-a) + (1.0 - m) * softplus(a);
    const double weight = alpha * m + (1.0 - alpha) * (1.0 - m);
    // d/da [q^beta * bce] = q^beta * ((p - m) - beta * p * bce)
    grad[i] = inv_n * weight * std::pow(q, beta) * ((p - m) - beta * p * bce);
  }
  return grad;
}

double focal_term(const TokenMaps& attn, const ScribbleSet& scribbles, double alpha,
                  double beta) {
  check_token_maps(attn, scribbles);
  double total = 0.0;
  for (const Scribble& s : scribbles.scribbles) {
    double per_scribble = 0.0;
    for (const std::string& token : s.tokens) {
      per_scribble += focal_loss(attn.at(token), s.mask, alpha, beta);
    }
    total += per_scribble / static_cast<double>(s.tokens.size());
  }
  return total / static_cast<double>(scribbles.size());
}

TokenMaps grad_focal_term(const TokenMaps& attn, const ScribbleSet& scribbles, double alpha,
                          double beta) {
  check_token_maps(attn, scribbles);
  TokenMaps grads;
  const double n_scribbles = static_cast<double>(scribbles.size());
  for (const Scribble& s : scribbles.scribbles) {
    const double w = 1.0 / (n_scribbles * static_cast<double>(s.tokens.size()));
    for (const std::string& token : s.tokens) {
      Grid2D g = grad_focal_loss(attn.at(token), s.mask, alpha, beta);
      g *= w;
      auto [it, inserted] = grads.try_emplace(token, std::move(g));
      if (!inserted) it->second += g;
    }
  }
  return grads;
}

CrossLossTerms cross_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                          const GuidanceConfig& cfg) {
  CrossLossTerms out;
  out.focal = focal_term(attn, scribbles, cfg.alpha, cfg.beta);
  const MomentLossTerms m = moment_loss(attn, scribbles, cfg.moment_options());
  out.centroid = m.centroid;
  out.central = m.central;
  out.moment = m.total;
  out.total = cfg.w_focal * out.focal + cfg.w_moment * out.moment;
  return out;
}

TokenMaps grad_cross_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                          const GuidanceConfig& cfg) {
  TokenMaps grads = grad_focal_term(attn, scribbles, cfg.alpha, cfg.beta);
  for (auto& [token, g] : grads) g *= cfg.w_focal;
  if (cfg.w_moment != 0.0 && (cfg.lambda1 != 0.0 || cfg.lambda2 != 0.0)) {
    const TokenMaps moment = grad_moment_loss(attn, scribbles, cfg.moment_options());
    for (const auto& [token, g] : moment) {
      Grid2D scaled = g;
      scaled *= cfg.w_moment;
      grads.at(token) += scaled;
    }
  }
  return grads;
}

}  // namespace sgd
