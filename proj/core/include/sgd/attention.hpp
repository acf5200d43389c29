#pragma once

#include "sgd/config.hpp"
#include "sgd/grid.hpp"
#include "sgd/moments.hpp"
#include "sgd/scribble.hpp"

namespace sgd {

// Focal loss on a logit map A against a mask M:
//   mean over cells of (1 - s)^beta * (alpha M + (1 - alpha)(1 - M)) * BCE(M, s),
// with s = logistic(A). The modulating factor is (1 - s)^beta on every cell,
// positive or negative.
double focal_loss(const Grid2D& logits, const Grid2D& mask, double alpha, double beta);

/// Cellwise d(focal_loss)/d(logit).
Grid2D grad_focal_loss(const Grid2D& logits, const Grid2D& mask, double alpha, double beta);

struct CrossLossTerms {
  double focal = 0.0;     // averaged over tokens, then scribbles
  double centroid = 0.0;
  double central = 0.0;
  double moment = 0.0;    // lambda1 * centroid + lambda2 * central
  double total = 0.0;     // w_focal * focal + w_moment * moment
};

CrossLossTerms cross_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                          const GuidanceConfig& cfg);

/// d(total)/d(logit) for every token map referenced by the scribbles.
TokenMaps grad_cross_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                          const GuidanceConfig& cfg);

/// Focal part only, already averaged the same way as in cross_loss.
double focal_term(const TokenMaps& attn, const ScribbleSet& scribbles, double alpha,
                  double beta);
TokenMaps grad_focal_term(const TokenMaps& attn, const ScribbleSet& scribbles, double alpha,
                          double beta);

}  // namespace sgd
