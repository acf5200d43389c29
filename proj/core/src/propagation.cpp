#include "sgd/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "sgd/errors.hpp"

namespace sgd {

AttentionMatrix::AttentionMatrix(int res) : resolution(res) {
  if (res < 1) throw InputError("attention resolution must be positive");
  rows.assign(cells() * cells(), 0.0);
}

namespace {

void normalize(std::span<double> row) {
  double total = 0.0;
  for (double v : row) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericalError("attention row has no positive mass");
  }
  for (double& v : row) v /= total;
}

}  // namespace

AttentionMatrix aggregate_self_attention(const SelfAttentionStack& stack,
                                         std::span<const double> weights,
                                         int target_resolution) {
  if (stack.levels.empty()) throw InputError("aggregate_self_attention: empty stack");
  if (weights.size() != stack.levels.size()) {
    throw InputError("aggregate_self_attention: one weight per level required");
  }
  AttentionMatrix agg(target_resolution);
  const std::size_t target_cells = agg.cells();

  for (std::size_t level = 0; level < stack.levels.size(); ++level) {
    const AttentionMatrix& src = stack.levels[level];
    const int r = src.resolution;
    if (r < 1 || target_resolution % r != 0) {
      throw InputError("aggregate_self_attention: resolution " + std::to_string(r) +
                       " does not divide " + std::to_string(target_resolution));
    }
    if (src.rows.size() != src.cells() * src.cells()) {
      throw InputError("aggregate_self_attention: malformed level");
    }
    const double w = weights[level];
    if (w == 0.0) continue;
    const int delta = target_resolution / r;

    // Keys of every source query, upsampled to the target key grid.
    std::vector<double> upsampled(src.cells() * target_cells);
    for (std::size_t q = 0; q < src.cells(); ++q) {
      const auto row = src.row(q);
      Grid2D keys(r, r, std::vector<double>(row.begin(), row.end()));
      Grid2D up = r == target_resolution ? std::move(keys)
                                         : resize_bilinear(keys, target_resolution,
                                                           target_resolution);
      std::span<double> dst(upsampled.data() + q * target_cells, target_cells);
      std::copy(up.values().begin(), up.values().end(), dst.begin());
      normalize(dst);
    }

    for (int h = 0; h < target_resolution; ++h) {
      for (int x = 0; x < target_resolution; ++x) {
        const std::size_t q_src = static_cast<std::size_t>(h / delta) * r + (x / delta);
        const std::size_t q_dst = static_cast<std::size_t>(h) * target_resolution + x;
        const double* from = upsampled.data() + q_src * target_cells;
        auto to = agg.row(q_dst);
        for (std::size_t k = 0; k < target_cells; ++k) to[k] += w * from[k];
      }
    }
  }
  for (std::size_t q = 0; q < target_cells; ++q) normalize(agg.row(q));
  return agg;
}

AttentionMatrix aggregate_self_attention(const SelfAttentionStack& stack,
                                         const GuidanceConfig& cfg, int target_resolution) {
  if (stack.levels.size() != cfg.agg_resolutions.size()) {
    throw InputError("aggregate_self_attention: stack/resolution list length mismatch");
  }
  for (std::size_t i = 0; i < stack.levels.size(); ++i) {
    if (stack.levels[i].resolution != cfg.agg_resolutions[i]) {
      throw InputError("aggregate_self_attention: stack level " + std::to_string(i) +
                       " has resolution " + std::to_string(stack.levels[i].resolution));
    }
  }
  return aggregate_self_attention(stack, cfg.agg_weights, target_resolution);
}

AnchorGrid pool_anchors(const AttentionMatrix& aggregated, int anchor_factor) {
  const int res = aggregated.resolution;
  if (anchor_factor < 1 || res % anchor_factor != 0) {
    throw InputError("pool_anchors: factor " + std::to_string(anchor_factor) +
                     " does not divide resolution " + std::to_string(res));
  }
  AnchorGrid grid;
  grid.width = res / anchor_factor;
  grid.height = res / anchor_factor;
  grid.keys = aggregated.cells();
  grid.distributions.assign(grid.count() * grid.keys, 0.0);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const std::size_t a =
          static_cast<std::size_t>(y / anchor_factor) * grid.width + (x / anchor_factor);
      const auto row = aggregated.row(static_cast<std::size_t>(y) * res + x);
      double* dst = grid.distributions.data() + a * grid.keys;
      for (std::size_t k = 0; k < grid.keys; ++k) dst[k] += row[k];
    }
  }
  for (std::size_t a = 0; a < grid.count(); ++a) {
    normalize({grid.distributions.data() + a * grid.keys, grid.keys});
  }
  return grid;
}

double symmetric_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("symmetric_kl: length mismatch");
  if (p.empty()) throw InputError("symmetric_kl: empty distributions");
  const double n = static_cast<double>(p.size());
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sp += p[i];
    sq += q[i];
  }
  const double zp = sp + n * kKlSmoothing;
  const double zq = sq + n * kKlSmoothing;
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = (p[i] + kKlSmoothing) / zp;
    const double b = (q[i] + kKlSmoothing) / zq;
    d += (a - b) * (std::log(a) - std::log(b));
  }
  return 0.5 * d;
}

double symmetric_kl(const ProbVector& p, const ProbVector& q) {
  return symmetric_kl(p.values(), q.values());
}

std::vector<std::uint8_t> PropagationState::visited() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height, 0);
  for (const Grid2D& r : regions) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i] > 0.5) out[i] = 1;
    }
  }
  return out;
}

std::size_t PropagationState::region_cells() const noexcept {
  std::size_t n = 0;
  for (const Grid2D& r : regions) n += r.count_set();
  return n;
}

PropagationState initial_propagation_state(const ScribbleSet& scribbles, int anchor_width,
                                           int anchor_height, int k1, int k2) {
  scribbles.validate();
  if (anchor_width < 1 || anchor_height < 1 || scribbles.width % anchor_width != 0 ||
      scribbles.height % anchor_height != 0) {
    throw InputError("anchor grid must evenly divide the scribble canvas");
  }
  const int fx = scribbles.width / anchor_width;
  const int fy = scribbles.height / anchor_height;
  PropagationState state;
  state.width = anchor_width;
  state.height = anchor_height;
  state.k1 = k1;
  state.k2 = k2;
  for (const Scribble& s : scribbles.scribbles) {
    Grid2D region(anchor_width, anchor_height);
    for (int y = 0; y < s.mask.height(); ++y) {
      for (int x = 0; x < s.mask.width(); ++x) {
        if (s.mask.at(x, y) > 0.5) region.at(x / fx, y / fy) = 1.0;
      }
    }
    state.regions.push_back(region);
    state.seeds.push_back(std::move(region));
  }
  return state;
}

PropagationState merge_neighbors(const PropagationState& state, const AnchorGrid& anchors,
                                 double tau, int top_k, std::vector<Merge>* merged) {
  if (anchors.width != state.width || anchors.height != state.height) {
    throw InputError("merge_neighbors: anchor grid does not match the propagation state");
  }
  if (top_k < 1) throw InputError("merge_neighbors: top_k must be >= 1");
  const std::vector<std::uint8_t> visited = state.visited();
  const std::size_t n_anchors = anchors.count();

  std::vector<Merge> candidates;
  std::vector<double> mean(anchors.keys);
  std::vector<std::uint8_t> evaluated(n_anchors);
  for (std::size_t s = 0; s < state.regions.size(); ++s) {
    const Grid2D& region = state.regions[s];
    std::fill(mean.begin(), mean.end(), 0.0);
    std::size_t members = 0;
    for (std::size_t a = 0; a < n_anchors; ++a) {
      if (region[a] <= 0.5) continue;
      const auto dist = anchors.anchor(a);
      for (std::size_t k = 0; k < anchors.keys; ++k) mean[k] += dist[k];
      ++members;
    }
    if (members == 0) {
      throw InputError("merge_neighbors: scribble region " + std::to_string(s) + " is empty");
    }
    for (double& v : mean) v /= static_cast<double>(members);

    std::fill(evaluated.begin(), evaluated.end(), 0);
    for (const Cell& b : boundary_anchors(region)) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = b.x + dx;
          const int ny = b.y + dy;
          if ((dx == 0 && dy == 0) || !region.contains(nx, ny)) continue;
          const std::size_t n = region.index(nx, ny);
          if (visited[n] || evaluated[n]) continue;
          evaluated[n] = 1;
          const double d = symmetric_kl(mean, anchors.anchor(n));
          if (d < tau) candidates.push_back({d, n, s});
        }
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Merge& a, const Merge& b) {
    return std::tie(a.distance, a.anchor, a.scribble) <
           std::tie(b.distance, b.anchor, b.scribble);
  });

  PropagationState next = state;
  std::vector<std::uint8_t> claimed(n_anchors, 0);
  int count = 0;
  if (merged) merged->clear();
  for (const Merge& c : candidates) {
    if (count >= top_k) break;
    if (claimed[c.anchor]) continue;
    claimed[c.anchor] = 1;
    next.regions[c.scribble][c.anchor] = 1.0;
    if (merged) merged->push_back(c);
    ++count;
  }
  return next;
}

PropagationState merge_neighbors(const PropagationState& state, const AnchorGrid& anchors,
                                 const GuidanceConfig& cfg, std::vector<Merge>* merged) {
  return merge_neighbors(state, anchors, cfg.tau, cfg.top_k, merged);
}

ScribbleSet apply_regions(const ScribbleSet& original, const PropagationState& state) {
  if (state.regions.size() != original.size()) {
    throw InputError("apply_regions: region count does not match the scribble set");
  }
  const int fx = original.width / state.width;
  const int fy = original.height / state.height;
  ScribbleSet out = original;
  for (std::size_t s = 0; s < out.size(); ++s) {
    Grid2D& mask = out.scribbles[s].mask;
    const Grid2D& region = state.regions[s];
    const Grid2D& seed = state.seeds[s];
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        const std::size_t a = region.index(x / fx, y / fy);
        if (region[a] > 0.5 && seed[a] <= 0.5) mask.at(x, y) = 1.0;
      }
    }
  }
  return out;
}

}  // namespace sgd
