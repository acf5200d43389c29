#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgd/config.hpp"
#include "sgd/schedule.hpp"
#include "sgd/toyworld.hpp"

namespace sgd {

struct ScheduleSpec {
  int total_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int inference_steps = 50;

  DiffusionSchedule build() const {
    return make_schedule(total_steps, beta_start, beta_end, inference_steps);
  }
};

/// Everything a batch run reads from its JSON config. Missing keys keep the
/// defaults below; unknown keys are rejected.
struct RunConfig {
  WorldSpec world;
  GuidanceConfig guidance;
  ScheduleSpec schedule;
  std::vector<std::uint64_t> seeds{0};
  /// Template the scribbles were drawn from, for mIoU. Inferred from the
  /// scribbles when absent.
  std::optional<std::size_t> target_template;
  std::string output_dir = "out";
  /// Worker threads for the seed pool; 0 picks the hardware concurrency.
  int workers = 0;

  /// Throws InputError on any violated invariant (and normalizes weights).
  void validate();
};

RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Every field spelled out, including defaults. Parsing the result gives back
/// the same config.
std::string resolved_config_json(const RunConfig& config);

}  // namespace sgd
