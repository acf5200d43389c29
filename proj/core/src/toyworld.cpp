#include "sgd/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "sgd/errors.hpp"

namespace sgd {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
// Templates whose responsibility is below this are left out of the
// self-attention mixture; their contribution is under double rounding.
constexpr double kNegligibleWeight = 1e-15;
// Per-world ceiling for cached affinity rows.
constexpr std::size_t kAffinityCacheBytes = std::size_t{1} << 30;

std::vector<Point2> lattice_centers(const WorldSpec& spec) {
  if (!spec.centers.empty()) return spec.centers;
  if (spec.center_grid < 1) throw InputError("world: center_grid must be >= 1");
  const double mid = 0.5 * (spec.resolution - 1);
  const double offset = 0.5 * (spec.center_grid - 1);
  std::vector<Point2> out;
  for (int j = 0; j < spec.center_grid; ++j) {
    for (int i = 0; i < spec.center_grid; ++i) {
      out.push_back({mid + spec.center_spacing * (i - offset),
                     mid + spec.center_spacing * (j - offset)});
    }
  }
  return out;
}

struct Placement {
  double theta;
  Point2 center;
};

}  // namespace

double wrap_axis(double theta) {
  constexpr double pi = std::numbers::pi;
  double t = std::fmod(theta, pi);
  if (t <= -0.5 * pi) t += pi;
  if (t > 0.5 * pi) t -= pi;
  return t;
}

Grid2D render_blob(int size, Point2 center, double theta, double sigma_major,
                   double sigma_minor) {
  if (!(sigma_major > 0.0) || !(sigma_minor > 0.0)) {
    throw InputError("render_blob: axes must be positive");
  }
  Grid2D g(size, size);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double inv_a2 = 1.0 / (sigma_major * sigma_major);
  const double inv_b2 = 1.0 / (sigma_minor * sigma_minor);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - center.x;
      const double dy = y - center.y;
      const double u = c * dx + s * dy;   // along the major axis
      const double v = -s * dx + c * dy;  // along the minor axis
      g.at(x, y) = std::exp(-0.5 * (u * u * inv_a2 + v * v * inv_b2));
    }
  }
  return g;
}

struct ToyWorld::AffinityCache {
  std::mutex mutex;
  std::map<int, std::shared_ptr<const std::vector<float>>> rows;  // by resolution
};

ToyWorld::ToyWorld(WorldSpec spec) : spec_(std::move(spec)), cache_(std::make_shared<AffinityCache>()) {
  const int n = spec_.resolution;
  if (n < 2) throw InputError("world: resolution must be >= 2");
  if (spec_.classes.empty()) throw InputError("world: at least one class is required");
  for (std::size_t i = 0; i < spec_.classes.size(); ++i) {
    for (std::size_t j = i + 1; j < spec_.classes.size(); ++j) {
      if (spec_.classes[i] == spec_.classes[j]) {
        throw InputError("world: duplicate class '" + spec_.classes[i] + "'");
      }
    }
  }
  if (spec_.orientations_deg.empty()) throw InputError("world: at least one orientation");
  if (!(spec_.sigma_major > 0.0) || !(spec_.sigma_minor > 0.0)) {
    throw InputError("world: blob axes must be positive");
  }
  if (4.0 * std::max(spec_.sigma_major, spec_.sigma_minor) > n) {
    throw InputError("world: resolution " + std::to_string(n) +
                     " is too small for the blob axes (need >= 4 sigma_major)");
  }
  if (!(spec_.bandwidth > 0.0)) throw InputError("world: bandwidth h must be > 0");
  if (!(spec_.logit_scale > 0.0)) throw InputError("world: logit_scale must be > 0");

  const std::vector<Point2> centers = lattice_centers(spec_);
  if (centers.empty()) throw InputError("world: at least one center");
  for (const Point2& c : centers) {
    if (!(c.x >= 0.0 && c.y >= 0.0 && c.x <= n - 1 && c.y <= n - 1)) {
      throw InputError("world: center lies outside the image");
    }
  }

  std::vector<Placement> placements;
  for (double deg : spec_.orientations_deg) {
    for (const Point2& c : centers) placements.push_back({wrap_axis(deg * kDegToRad), c});
  }

  const std::size_t n_classes = spec_.classes.size();
  auto make_template = [&](const std::vector<std::pair<std::size_t, Placement>>& objects) {
    Template t;
    t.image = Grid2D(n, n);
    t.masks.assign(n_classes, Grid2D(n, n));
    t.truth.assign(n_classes, ObjectTruth{});
    for (const auto& [cls, place] : objects) {
      Grid2D blob = render_blob(n, place.center, place.theta, spec_.sigma_major, spec_.sigma_minor);
      for (std::size_t i = 0; i < blob.size(); ++i) t.image[i] = std::max(t.image[i], blob[i]);
      t.masks[cls] = std::move(blob);
      t.truth[cls] = {true, place.center, place.theta, spec_.sigma_major, spec_.sigma_minor};
    }
    templates_.push_back(std::move(t));
  };

  if (!spec_.compose_classes || n_classes == 1) {
    for (std::size_t cls = 0; cls < n_classes; ++cls) {
      for (const Placement& p : placements) make_template({{cls, p}});
    }
  } else {
    std::vector<std::pair<std::size_t, Placement>> current;
    auto recurse = [&](auto&& self, std::size_t cls) -> void {
      if (cls == n_classes) {
        make_template(current);
        return;
      }
      for (const Placement& p : placements) {
        const bool clash = std::any_of(current.begin(), current.end(), [&](const auto& o) {
          return o.second.center.x == p.center.x && o.second.center.y == p.center.y;
        });
        if (clash) continue;
        current.emplace_back(cls, p);
        self(self, cls + 1);
        current.pop_back();
      }
    };
    recurse(recurse, 0);
  }
  if (templates_.size() < 2) throw InputError("world: at least two templates are required");

  if (spec_.priors.empty()) {
    for (Template& t : templates_) t.prior = 1.0 / static_cast<double>(templates_.size());
  } else {
    if (spec_.priors.size() != templates_.size()) {
      throw InputError("world: priors must have one entry per template (" +
                       std::to_string(templates_.size()) + ")");
    }
    const ProbVector p = ProbVector::normalized(spec_.priors);
    for (std::size_t i = 0; i < templates_.size(); ++i) {
      if (!(p[i] > 0.0)) throw InputError("world: priors must be positive");
      templates_[i].prior = p[i];
    }
  }
}

ToyWorld build_world(WorldSpec spec) { return ToyWorld(std::move(spec)); }

int ToyWorld::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.classes.size(); ++i) {
    if (spec_.classes[i] == name) return static_cast<int>(i);
  }
  throw InputError("unknown class '" + std::string(name) + "'");
}

std::vector<std::uint8_t> ToyWorld::eligible(std::span<const int> condition) const {
  std::vector<std::uint8_t> out(templates_.size(), 1);
  for (int c : condition) {
    if (c < 0 || static_cast<std::size_t>(c) >= spec_.classes.size()) {
      throw InputError("condition names an unknown class index");
    }
    for (std::size_t i = 0; i < templates_.size(); ++i) {
      if (!templates_[i].truth[static_cast<std::size_t>(c)].present) out[i] = 0;
    }
  }
  if (std::none_of(out.begin(), out.end(), [](std::uint8_t e) { return e != 0; })) {
    throw InputError("no template contains every conditioning class");
  }
  return out;
}

std::vector<double> ToyWorld::compute_affinity_rows(std::size_t template_index,
                                                    int resolution) const {
  if (resolution < 1 || spec_.resolution % resolution != 0) {
    throw InputError("self-attention resolution " + std::to_string(resolution) +
                     " does not divide the world resolution");
  }
  const Grid2D small = avg_pool(templates_.at(template_index).image, spec_.resolution / resolution);
  const std::size_t cells = small.size();
  const double inv_h = 1.0 / spec_.bandwidth;
  std::vector<double> rows(cells * cells);
  for (std::size_t p = 0; p < cells; ++p) {
    double* row = rows.data() + p * cells;
    const double a = small[p];
    // The largest logit is 0 (q = p), so no shift is needed before exp.
    double total = 0.0;
    for (std::size_t q = 0; q < cells; ++q) {
      const double d = a - small[q];
      row[q] = std::exp(-d * d * inv_h);
      total += row[q];
    }
    for (std::size_t q = 0; q < cells; ++q) row[q] /= total;
  }
  return rows;
}

std::span<const float> ToyWorld::affinity_rows(std::size_t template_index, int resolution) const {
  const std::size_t cells = static_cast<std::size_t>(resolution) * resolution;
  const std::size_t per_template = cells * cells;
  std::shared_ptr<const std::vector<float>> block;
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->rows.find(resolution);
    if (it != cache_->rows.end()) block = it->second;
  }
  if (!block) {
    if (per_template * templates_.size() * sizeof(float) > kAffinityCacheBytes) {
      throw InputError("self-attention cache would exceed its memory ceiling; "
                       "use fewer templates or lower agg_resolutions");
    }
    auto fresh = std::make_shared<std::vector<float>>(per_template * templates_.size());
    for (std::size_t i = 0; i < templates_.size(); ++i) {
      const std::vector<double> rows = compute_affinity_rows(i, resolution);
      std::copy(rows.begin(), rows.end(), fresh->begin() + static_cast<std::ptrdiff_t>(i * per_template));
    }
    std::lock_guard lock(cache_->mutex);
    block = cache_->rows.try_emplace(resolution, std::move(fresh)).first->second;
  }
  return {block->data() + template_index * per_template, per_template};
}

std::vector<double> responsibilities(const ToyWorld& world, const Grid2D& x, double alpha,
                                     std::span<const int> condition) {
  const int n = world.resolution();
  if (x.width() != n || x.height() != n) throw InputError("latent does not match the world");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw NumericalError("responsibilities need 0 < alpha < 1");
  }
  const std::vector<std::uint8_t> ok = world.eligible(condition);
  const auto& templates = world.templates();
  const double sqrt_a = std::sqrt(alpha);
  const double inv_two_var = 1.0 / (2.0 * (1.0 - alpha));

  std::vector<double> logw(templates.size(), -std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < templates.size(); ++i) {
    if (!ok[i]) continue;
    const Grid2D& mu = templates[i].image;
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double d = x[k] - sqrt_a * mu[k];
      d2 += d * d;
    }
    logw[i] = std::log(templates[i].prior) - d2 * inv_two_var;
    best = std::max(best, logw[i]);
  }
  if (!std::isfinite(best)) {
    throw NumericalError("responsibilities: latent is non-finite or too far from every template");
  }
  double total = 0.0;
  std::vector<double> w(templates.size(), 0.0);
  for (std::size_t i = 0; i < templates.size(); ++i) {
    if (!ok[i]) continue;
    w[i] = std::exp(logw[i] - best);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

Grid2D model_epsilon(const ToyWorld& world, const Grid2D& x, double alpha,
                     std::span<const int> condition) {
  if (!(alpha < 1.0)) throw NumericalError("model_epsilon: alpha_t = 1 has no noise scale");
  const std::vector<double> w = responsibilities(world, x, alpha, condition);
  const double sqrt_a = std::sqrt(alpha);
  Grid2D mean(x.width(), x.height());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    const Grid2D& mu = world.templates()[i].image;
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += w[i] * mu[k];
  }
  const double inv = 1.0 / std::sqrt(1.0 - alpha);
  Grid2D eps(x.width(), x.height());
  for (std::size_t k = 0; k < eps.size(); ++k) eps[k] = (x[k] - sqrt_a * mean[k]) * inv;
  return eps;
}

CrossAttention::CrossAttention(const ToyWorld& world, const Grid2D& x, double alpha,
                               std::span<const int> condition)
    : world_(&world), alpha_(alpha), weights_(responsibilities(world, x, alpha, condition)) {}

Grid2D CrossAttention::soft_map(int class_index) const {
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= world_->classes().size()) {
    throw InputError("cross attention: unknown class index");
  }
  const int n = world_->resolution();
  Grid2D soft(n, n);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    const Grid2D& m = world_->templates()[i].masks[static_cast<std::size_t>(class_index)];
    for (std::size_t k = 0; k < soft.size(); ++k) soft[k] += weights_[i] * m[k];
  }
  return soft;
}

Grid2D CrossAttention::logits(int class_index) const {
  Grid2D a = soft_map(class_index);
  const double s = world_->logit_scale();
  for (double& v : a.values()) v = s * (v - 0.5);
  return a;
}

Grid2D CrossAttention::latent_gradient(int class_index, const Grid2D& upstream) const {
  const int n = world_->resolution();
  if (upstream.width() != n || upstream.height() != n) {
    throw InputError("cross attention: upstream gradient does not match the world");
  }
  const auto& templates = world_->templates();
  const std::size_t cls = static_cast<std::size_t>(class_index);
  if (class_index < 0 || cls >= world_->classes().size()) {
    throw InputError("cross attention: unknown class index");
  }
  // d w_i / dx = w_i (grad l_i - sum_j w_j grad l_j), grad l_i = (sqrt(a) mu_i - x)/(1 - a).
  // Contracting with c_i = <upstream, mask_i> leaves sqrt(a)/(1-a) sum_i w_i (c_i - cbar) mu_i.
  std::vector<double> c(templates.size(), 0.0);
  double c_bar = 0.0;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    const Grid2D& m = templates[i].masks[cls];
    double dot = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) dot += upstream[k] * m[k];
    c[i] = dot;
    c_bar += weights_[i] * dot;
  }
  const double scale = world_->logit_scale() * std::sqrt(alpha_) / (1.0 - alpha_);
  Grid2D grad(n, n);
  for (std::size_t i = 0; i < templates.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    const double coeff = scale * weights_[i] * (c[i] - c_bar);
    if (coeff == 0.0) continue;
    const Grid2D& mu = templates[i].image;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += coeff * mu[k];
  }
  return grad;
}

SelfAttentionStack self_attention_stack(const ToyWorld& world, const Grid2D& x, double alpha,
                                        const GuidanceConfig& cfg,
                                        std::span<const int> condition) {
  const std::vector<double> w = responsibilities(world, x, alpha, condition);
  SelfAttentionStack stack;
  for (int r : cfg.agg_resolutions) {
    if (r < 1 || world.resolution() % r != 0) {
      throw InputError("agg resolution " + std::to_string(r) +
                       " does not divide the world resolution");
    }
    AttentionMatrix level(r);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] < kNegligibleWeight) continue;
      const auto rows = world.affinity_rows(i, r);
      for (std::size_t k = 0; k < rows.size(); ++k) level.rows[k] += w[i] * rows[k];
    }
    for (std::size_t q = 0; q < level.cells(); ++q) {
      auto row = level.row(q);
      double total = 0.0;
      for (double v : row) total += v;
      for (double& v : row) v /= total;
    }
    stack.levels.push_back(std::move(level));
  }
  return stack;
}

DecodedSample decode_final(const ToyWorld& world, const Grid2D& x0, double alpha_final) {
  const std::vector<double> w = responsibilities(world, x0, alpha_final);
  std::size_t best = 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i] > w[best]) best = i;
  }
  const Template& t = world.templates()[best];
  DecodedSample out;
  out.template_index = best;
  out.truth = t.truth;
  for (const Grid2D& soft : t.masks) {
    Grid2D mask(soft.width(), soft.height());
    for (std::size_t k = 0; k < soft.size(); ++k) mask[k] = soft[k] >= 0.5 ? 1.0 : 0.0;
    out.masks.push_back(std::move(mask));
  }
  return out;
}

DecodedSample decode_final(const ToyWorld& world, const Grid2D& x0,
                           const DiffusionSchedule& schedule) {
  return decode_final(world, x0, schedule.alpha(1));
}

}  // namespace sgd
