#pragma once

#include <exception>
#include <filesystem>
#include <ostream>
#include <optional>
#include <vector>

#include "sgd/errors.hpp"

namespace sgd::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kInputError = 2,
  kNumericalAbort = 3,
};

struct GenerateArgs {
  std::filesystem::path config;
  std::filesystem::path scribbles;
  std::optional<std::filesystem::path> out;  // overrides config output_dir
};

/// Runs every configured seed and writes, under the output directory:
///   resolved_config.json, summary.json and seed_<n>/{image.pgm,
///   decoded.pgm, diagnostics.json, metrics.json}.
int run_generate(const GenerateArgs& args, std::ostream& log);

struct GradcheckArgs {
  std::filesystem::path config;
  double attention_tolerance = 1e-4;
  double latent_tolerance = 1e-3;
  int cases = 20;
  /// Test hook: perturbs the analytic gradients so the check must fail.
  bool corrupt_gradient = false;
};

int run_gradcheck(const GradcheckArgs& args, std::ostream& out);

/// Aggregates every metrics.json below each directory. Two directories give
/// a side-by-side comparison.
int run_evaluate(const std::vector<std::filesystem::path>& dirs, std::ostream& out);

/// Maps the library's exception types to exit codes and prints the message.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kNumericalAbort;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace sgd::cli
