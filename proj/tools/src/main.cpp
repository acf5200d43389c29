#include <iostream>

#include "CLI11.hpp"
#include "sgd_cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace sgd::cli;
  CLI::App app{"Scribble-guided sampling on an analytic toy diffusion model"};
  app.require_subcommand(1);

  GenerateArgs gen;
  std::string out_dir;
  auto* generate = app.add_subcommand("generate", "Run guided sampling for every configured seed");
  generate->add_option("--config", gen.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  generate->add_option("--scribbles", gen.scribbles, "Scribble file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  generate->add_option("--out", out_dir, "Output directory (overrides the config)");

  GradcheckArgs check;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the guidance gradients");
  gradcheck->add_option("--config", check.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  gradcheck->add_option("--cases", check.cases, "Random attention cases")->check(CLI::PositiveNumber);
  gradcheck->add_option("--attention-tol", check.attention_tolerance, "Attention-space tolerance");
  gradcheck->add_option("--latent-tol", check.latent_tolerance, "Latent-space tolerance");
  gradcheck->add_flag("--corrupt-gradient", check.corrupt_gradient)->group("");

  std::vector<std::filesystem::path> dirs;
  auto* evaluate = app.add_subcommand("evaluate", "Aggregate per-seed metrics (one or two result dirs)");
  evaluate->add_option("dirs", dirs, "Result directories")->required()->expected(1, 2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  if (*generate) {
    if (!out_dir.empty()) gen.out = out_dir;
    return guarded(std::cerr, [&] { return run_generate(gen, std::cerr); });
  }
  if (*gradcheck) return guarded(std::cerr, [&] { return run_gradcheck(check, std::cout); });
  return guarded(std::cerr, [&] { return run_evaluate(dirs, std::cout); });
}
