#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace sgd {

/// Row-major 2D field of doubles. x is the column (rightward), y the row
/// (downward). Attention maps, masks and latents all use this type.
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(int width, int height, double fill = 0.0);
  Grid2D(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& at(int x, int y) { return values_[index(x, y)]; }
  double at(int x, int y) const { return values_[index(x, y)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool same_shape(const Grid2D& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double sum() const noexcept;
  double max_abs() const noexcept;
  bool all_finite() const noexcept;
  /// Number of cells with a value > 0.5 (binary masks).
  std::size_t count_set() const noexcept;

  Grid2D& operator+=(const Grid2D& other);
  Grid2D& operator-=(const Grid2D& other);
  Grid2D& operator*=(double s) noexcept;

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

Grid2D operator+(Grid2D a, const Grid2D& b);
Grid2D operator-(Grid2D a, const Grid2D& b);
Grid2D operator*(double s, Grid2D g);

/// Throws NumericalError naming `what` if any value is NaN or infinite.
void require_finite(const Grid2D& g, std::string_view what);

/// Bilinear resampling with half-pixel centers and edge clamping.
Grid2D resize_bilinear(const Grid2D& g, int out_w, int out_h);

/// Mean over non-overlapping factor x factor blocks.
Grid2D avg_pool(const Grid2D& g, int factor);

/// Normalized nonnegative weights. Construction normalizes; sum is 1 to
/// within rounding.
class ProbVector {
 public:
  ProbVector() = default;
  /// Throws InputError on negative/non-finite entries or zero total mass.
  static ProbVector normalized(std::vector<double> weights);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> values() const noexcept { return p_; }

 private:
  std::vector<double> p_;
};

}  // namespace sgd
