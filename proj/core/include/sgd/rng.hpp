#pragma once

#include <cstdint>

#include "sgd/grid.hpp"

namespace sgd {

/// Counter-based generator: the n-th draw is splitmix64(seed, n), so a
/// stream is reproducible from its seed on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Standard normal via Box-Muller; pairs are consumed in order.
  double normal() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Grid2D sample_gaussian(Rng& rng, int width, int height);

}  // namespace sgd
