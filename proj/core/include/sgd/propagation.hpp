#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgd/config.hpp"
#include "sgd/grid.hpp"
#include "sgd/scribble.hpp"

namespace sgd {

/// Location-to-location attention at one square resolution: row q (a query
/// cell in row-major order) is a distribution over the resolution^2 keys.
struct AttentionMatrix {
  int resolution = 0;
  std::vector<double> rows;

  AttentionMatrix() = default;
  explicit AttentionMatrix(int res);

  std::size_t cells() const noexcept {
    return static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
  }
  std::span<double> row(std::size_t q) noexcept { return {rows.data() + q * cells(), cells()}; }
  std::span<const double> row(std::size_t q) const noexcept {
    return {rows.data() + q * cells(), cells()};
  }
};

/// One attention matrix per resolution, in the order of the config's
/// agg_resolutions.
struct SelfAttentionStack {
  std::vector<AttentionMatrix> levels;
};

/// Upsamples every level's key distributions to `target_resolution`
/// (bilinear, renormalized), maps query cells by integer division, and mixes
/// levels with `weights`. Rows of the result sum to 1.
AttentionMatrix aggregate_self_attention(const SelfAttentionStack& stack,
                                         std::span<const double> weights,
                                         int target_resolution);
/// Same, with levels and weights checked against cfg.agg_resolutions.
AttentionMatrix aggregate_self_attention(const SelfAttentionStack& stack,
                                         const GuidanceConfig& cfg, int target_resolution);

/// Pooled anchors: each anchor holds the renormalized mean of its
/// factor x factor member query rows.
struct AnchorGrid {
  int width = 0;
  int height = 0;
  std::size_t keys = 0;
  std::vector<double> distributions;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::span<const double> anchor(std::size_t i) const noexcept {
    return {distributions.data() + i * keys, keys};
  }
};

AnchorGrid pool_anchors(const AttentionMatrix& aggregated, int anchor_factor);

/// Additive smoothing applied to both arguments of symmetric_kl.
inline constexpr double kKlSmoothing = 1e-8;

/// 0.5 KL(p||q) + 0.5 KL(q||p) after smoothing. Evaluated as
/// 0.5 * sum (p - q)(ln p - ln q), which is exactly symmetric and has no
/// negative terms.
double symmetric_kl(std::span<const double> p, std::span<const double> q);
double symmetric_kl(const ProbVector& p, const ProbVector& q);

/// Anchor-level scribble regions. `seeds` are the regions the scribbles
/// started from; `regions` only ever grow.
struct PropagationState {
  int width = 0;
  int height = 0;
  std::vector<Grid2D> regions;
  std::vector<Grid2D> seeds;
  int k1 = 5;
  int k2 = 15;

  /// Anchors owned by any scribble; these are never candidates.
  std::vector<std::uint8_t> visited() const;
  bool active(int step) const noexcept { return k1 <= step && step <= k2; }
  std::size_t region_cells() const noexcept;
};

/// Anchor regions covering every scribble cell (an anchor is set when any
/// cell of its block is set).
PropagationState initial_propagation_state(const ScribbleSet& scribbles, int anchor_width,
                                           int anchor_height, int k1, int k2);

struct Merge {
  double distance = 0.0;
  std::size_t anchor = 0;    // row-major anchor index
  std::size_t scribble = 0;  // index into the scribble set
};

/// One propagation round: candidates are unvisited 8-neighbours of each
/// region's boundary whose distance to the region's mean distribution is
/// below tau; the top_k smallest over all scribbles are merged, ordered by
/// (distance, anchor index, scribble index) with the first claim on an anchor
/// winning. Optionally reports the merges made.
PropagationState merge_neighbors(const PropagationState& state, const AnchorGrid& anchors,
                                 double tau, int top_k, std::vector<Merge>* merged = nullptr);
PropagationState merge_neighbors(const PropagationState& state, const AnchorGrid& anchors,
                                 const GuidanceConfig& cfg, std::vector<Merge>* merged = nullptr);

/// Loss masks after propagation: each original scribble mask united with
/// the block-filled anchors its region gained beyond its seed.
ScribbleSet apply_regions(const ScribbleSet& original, const PropagationState& state);

}  // namespace sgd
