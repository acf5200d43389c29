#pragma once

#include <map>
#include <string>

#include "sgd/grid.hpp"
#include "sgd/scribble.hpp"

namespace sgd {

/// Per-token activation maps (raw logits), keyed by token.
using TokenMaps = std::map<std::string, Grid2D>;

/// Below this ratio of eigenvalue gap to trace, a distribution has no
/// meaningful principal axis.
inline constexpr double kIsotropyEpsilon = 1e-3;

struct MomentSummary {
  double m00 = 0.0;
  double m10 = 0.0;
  double m01 = 0.0;
  // Normalized central moments mu'_pq = m_pq / m00 - (centroid products).
  double mu20 = 0.0;
  double mu02 = 0.0;
  double mu11 = 0.0;
  Point2 centroid;
  /// Principal-axis angle in (-pi/2, pi/2], measured from +x toward +y.
  double theta = 0.0;
  bool isotropic = false;
};

/// Raw and central moments of a nonnegative field with positive mass.
MomentSummary moment_summary(const Grid2D& intensity);

/// Signed difference of two axis angles reduced modulo pi into [-pi/2, pi/2).
double axis_difference(double theta_a, double theta_b);

double logistic(double a) noexcept;
Grid2D logistic(const Grid2D& logits);

/// Coordinates used by the centroid term. `normalized` divides x by the grid
/// width and y by the height, so the term is on the same footing as the
/// orientation term; `cells` uses raw cell units.
enum class CentroidUnits { cells, normalized };

struct MomentLossOptions {
  double lambda1 = 0.6;
  double lambda2 = 0.6;
  CentroidUnits units = CentroidUnits::normalized;
};

struct MomentLossTerms {
  double centroid = 0.0;
  double central = 0.0;
  double total = 0.0;  // lambda1 * centroid + lambda2 * central
};

/// Centroid and orientation alignment between the logistic of each token map
/// and its scribble mask, averaged over tokens then scribbles. Orientation
/// terms are skipped when either side is isotropic.
MomentLossTerms moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                            const MomentLossOptions& options);
MomentLossTerms moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles, double lambda1,
                            double lambda2);

/// d(total)/d(logit) for every token map, in closed form.
TokenMaps grad_moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles,
                           const MomentLossOptions& options);
TokenMaps grad_moment_loss(const TokenMaps& attn, const ScribbleSet& scribbles, double lambda1,
                           double lambda2);

/// Throws InputError unless every token of every scribble has a map of the
/// scribble resolution.
void check_token_maps(const TokenMaps& attn, const ScribbleSet& scribbles);

}  // namespace sgd
