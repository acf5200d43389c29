#include "sgd/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgd/errors.hpp"

namespace sgd {

Grid2D::Grid2D(int width, int height, double fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw InputError("Grid2D dimensions must be positive, got " + std::to_string(width) +
                     "x" + std::to_string(height));
  }
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Grid2D::Grid2D(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) {
    throw InputError("Grid2D dimensions must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InputError("Grid2D value count does not match " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

double Grid2D::sum() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

double Grid2D::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool Grid2D::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t Grid2D::count_set() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](double v) { return v > 0.5; }));
}

Grid2D& Grid2D::operator+=(const Grid2D& other) {
  if (!same_shape(other)) throw InputError("Grid2D shape mismatch in +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Grid2D& Grid2D::operator-=(const Grid2D& other) {
  if (!same_shape(other)) throw InputError("Grid2D shape mismatch in -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Grid2D& Grid2D::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

Grid2D operator+(Grid2D a, const Grid2D& b) { return a += b; }
Grid2D operator-(Grid2D a, const Grid2D& b) { return a -= b; }
Grid2D operator*(double s, Grid2D g) { return g *= s; }

void require_finite(const Grid2D& g, std::string_view what) {
  if (!g.all_finite()) {
    throw NumericalError(std::string(what) + " contains non-finite values");
  }
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Half-pixel-center source coordinate, clamped to the valid sample range.
Tap source_tap(int dst, int in_size, int out_size) {
  double src = (dst + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
  const int lo = static_cast<int>(std::floor(src));
  const int hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, src - lo};
}

}  // namespace

Grid2D resize_bilinear(const Grid2D& g, int out_w, int out_h) {
  if (g.empty()) throw InputError("resize_bilinear: empty input grid");
  if (out_w < 1 || out_h < 1) throw InputError("resize_bilinear: output size must be >= 1");

  std::vector<Tap> xs(static_cast<std::size_t>(out_w));
  std::vector<Tap> ys(static_cast<std::size_t>(out_h));
  for (int x = 0; x < out_w; ++x) xs[x] = source_tap(x, g.width(), out_w);
  for (int y = 0; y < out_h; ++y) ys[y] = source_tap(y, g.height(), out_h);

  Grid2D out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const Tap& ty = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const Tap& tx = xs[x];
      const double top = g.at(tx.lo, ty.lo) * (1.0 - tx.frac) + g.at(tx.hi, ty.lo) * tx.frac;
      const double bottom = g.at(tx.lo, ty.hi) * (1.0 - tx.frac) + g.at(tx.hi, ty.hi) * tx.frac;
      out.at(x, y) = top * (1.0 - ty.frac) + bottom * ty.frac;
    }
  }
  return out;
}

Grid2D avg_pool(const Grid2D& g, int factor) {
  if (g.empty()) throw InputError("avg_pool: empty input grid");
  if (factor < 1 || g.width() % factor != 0 || g.height() % factor != 0) {
    throw InputError("avg_pool: factor " + std::to_string(factor) + " does not divide " +
                     std::to_string(g.width()) + "x" + std::to_string(g.height()));
  }
  const int ow = g.width() / factor;
  const int oh = g.height() / factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  Grid2D out(ow, oh);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) out.at(x / factor, y / factor) += g.at(x, y);
  }
  out *= inv;
  return out;
}

ProbVector ProbVector::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InputError("ProbVector: entries must be finite and nonnegative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw InputError("ProbVector: total mass must be positive");
  for (double& w : weights) w /= total;
  ProbVector p;
  p.p_ = std::move(weights);
  return p;
}

}  // namespace sgd
