#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "sgd/config.hpp"
#include "sgd/metrics.hpp"
#include "sgd/sampler.hpp"
#include "sgd/schedule.hpp"
#include "sgd/scribble.hpp"
#include "sgd/toyworld.hpp"

namespace sgd {

/// Half-length of the synthetic stroke drawn along a template's major axis
/// (1.5 sigma_major with the default axes).
inline constexpr double kStrokeHalfLength = 9.0;

/// One straight stroke per class present in the template, through the blob
/// centre along its major axis.
ScribbleSet oriented_scribbles(const ToyWorld& world, std::size_t template_index,
                               double half_length = kStrokeHalfLength, int thickness = 1);

/// Template a trial seed asks for; independent of the seed's noise stream.
std::size_t draw_target(const ToyWorld& world, std::uint64_t seed);

/// Template whose class masks cover the scribbles best (mean soft mask value
/// over the scribble cells, summed over scribbles; smallest index on ties).
std::size_t infer_target(const ToyWorld& world, const ScribbleSet& scribbles);

/// Scores a decoded sample against the scribbles and the target template.
EvalReport evaluate_sample(const ToyWorld& world, const ScribbleSet& scribbles,
                           const DecodedSample& decoded, std::size_t target_template);

struct TrialResult {
  SampleResult sample;
  DecodedSample decoded;
  EvalReport report;
  std::size_t target_template = 0;
};

/// guided_sample with Rng(seed), then decode and evaluate. The target is
/// inferred from the scribbles when not given.
TrialResult run_trial(const ToyWorld& world, const ScribbleSet& scribbles,
                      const GuidanceConfig& cfg, const DiffusionSchedule& schedule,
                      std::uint64_t seed, std::optional<std::size_t> target_template = {},
                      const SampleOptions& options = {});

/// Calls fn(i) for i in [0, count) on up to `workers` threads (0: hardware
/// concurrency). The first exception thrown by any call is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  std::size_t n = workers > 0 ? static_cast<std::size_t>(workers)
                              : std::max(1u, std::thread::hardware_concurrency());
  n = std::min(n, count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(body);
  if (n > 0) body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sgd
