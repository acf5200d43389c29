#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgd/config.hpp"
#include "sgd/grid.hpp"
#include "sgd/propagation.hpp"
#include "sgd/schedule.hpp"
#include "sgd/scribble.hpp"

namespace sgd {

/// Parameters of the analytic template world.
struct WorldSpec {
  int resolution = 32;
  std::vector<std::string> classes{"blob"};
  std::vector<double> orientations_deg{0.0, 30.0, 60.0, 90.0, 120.0, 150.0};
  /// Square lattice of centres around the image centre. Ignored when
  /// `centers` is non-empty.
  int center_grid = 3;
  double center_spacing = 4.0;
  std::vector<Point2> centers;
  double sigma_major = 6.0;
  double sigma_minor = 2.0;
  double logit_scale = 10.0;
  double bandwidth = 0.5;
  /// false: one template per (class, orientation, centre).
  /// true: every template holds one blob per class, at distinct centres.
  bool compose_classes = false;
  /// Optional per-template prior weights; uniform when empty.
  std::vector<double> priors;
};

struct ObjectTruth {
  bool present = false;
  Point2 center;
  double theta = 0.0;  // radians, (-pi/2, pi/2]
  double sigma_major = 0.0;
  double sigma_minor = 0.0;
};

struct Template {
  Grid2D image;                    // pixelwise max of the class blobs
  std::vector<Grid2D> masks;       // soft mask per class (zero when absent)
  std::vector<ObjectTruth> truth;  // per class
  double prior = 0.0;
};

/// exp(-0.5 d^T Sigma(theta)^-1 d) sampled at integer cells of a size x size
/// grid; theta is the major-axis angle from +x toward +y.
Grid2D render_blob(int size, Point2 center, double theta, double sigma_major,
                   double sigma_minor);

/// Normalizes an angle in radians into (-pi/2, pi/2].
double wrap_axis(double theta);

class ToyWorld {
 public:
  explicit ToyWorld(WorldSpec spec);

  const WorldSpec& spec() const noexcept { return spec_; }
  int resolution() const noexcept { return spec_.resolution; }
  double logit_scale() const noexcept { return spec_.logit_scale; }
  double bandwidth() const noexcept { return spec_.bandwidth; }
  const std::vector<std::string>& classes() const noexcept { return spec_.classes; }
  const std::vector<Template>& templates() const noexcept { return templates_; }
  std::size_t template_count() const noexcept { return templates_.size(); }

  /// Throws InputError for an unknown class name.
  int class_index(std::string_view name) const;
  /// Templates that contain every class in `condition` (all when empty).
  std::vector<std::uint8_t> eligible(std::span<const int> condition) const;

  /// Per-template self-affinity rows at `resolution`, cached on first use.
  /// Entry [i][p * r^2 + q] is template i's softmax row for query p.
  std::span<const float> affinity_rows(std::size_t template_index, int resolution) const;
  /// Computes one template's rows directly, in double precision.
  std::vector<double> compute_affinity_rows(std::size_t template_index, int resolution) const;

 private:
  struct AffinityCache;

  WorldSpec spec_;
  std::vector<Template> templates_;
  std::shared_ptr<AffinityCache> cache_;
};

ToyWorld build_world(WorldSpec spec);

/// Posterior template weights for a noisy latent:
/// w_i ~ pi_i exp(-|x - sqrt(alpha) mu_i|^2 / (2 (1 - alpha))), restricted to
/// templates holding every class in `condition`.
std::vector<double> responsibilities(const ToyWorld& world, const Grid2D& x, double alpha,
                                     std::span<const int> condition = {});

/// Exact mixture score expressed as a noise prediction:
/// (x - sqrt(alpha) sum_i w_i mu_i) / sqrt(1 - alpha).
Grid2D model_epsilon(const ToyWorld& world, const Grid2D& x, double alpha,
                     std::span<const int> condition = {});

/// Cross-attention proxy for one latent: logits s (sum_i w_i mask_i - 0.5)
/// and the contraction g -> grad_x sum(g * logits).
class CrossAttention {
 public:
  CrossAttention(const ToyWorld& world, const Grid2D& x, double alpha,
                 std::span<const int> condition = {});

  const std::vector<double>& weights() const noexcept { return weights_; }
  Grid2D soft_map(int class_index) const;
  Grid2D logits(int class_index) const;
  Grid2D latent_gradient(int class_index, const Grid2D& upstream) const;

 private:
  const ToyWorld* world_;
  double alpha_;
  std::vector<double> weights_;
};

/// Mixture of per-template self-affinity rows at every cfg.agg_resolutions
/// level, weighted by the responsibilities.
SelfAttentionStack self_attention_stack(const ToyWorld& world, const Grid2D& x, double alpha,
                                        const GuidanceConfig& cfg,
                                        std::span<const int> condition = {});

struct DecodedSample {
  std::size_t template_index = 0;
  std::vector<Grid2D> masks;  // binary, per class
  std::vector<ObjectTruth> truth;
};

/// Most responsible template at near-zero noise (alpha of timestep 1); ties go
/// to the smaller index.
DecodedSample decode_final(const ToyWorld& world, const Grid2D& x0, double alpha_final);
DecodedSample decode_final(const ToyWorld& world, const Grid2D& x0,
                           const DiffusionSchedule& schedule);

}  // namespace sgd
