#include <algorithm>
#include <fstream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "sgd/experiment.hpp"
#include "sgd/pgm.hpp"
#include "sgd/run_config.hpp"
#include "sgd_cli/commands.hpp"

namespace sgd::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string diagnostics_json(const SampleResult& sample) {
  ordered_json steps = ordered_json::array();
  for (const StepDiagnostics& d : sample.steps) {
    ordered_json s;
    s["step"] = d.step;
    s["t"] = d.t;
    s["t_prev"] = d.t_prev;
    s["focal"] = d.loss.focal;
    s["centroid"] = d.loss.centroid;
    s["central"] = d.loss.central;
    s["moment"] = d.loss.moment;
    s["total"] = d.loss.total;
    s["grad_norm"] = d.grad_norm;
    s["region_cells"] = d.region_cells;
    s["anchor_cells"] = d.anchor_cells;
    s["merged"] = d.merged;
    s["propagated"] = d.propagated;
    steps.push_back(std::move(s));
  }
  ordered_json doc;
  doc["steps"] = std::move(steps);
  return doc.dump(2) + "\n";
}

}  // namespace

int run_generate(const GenerateArgs& args, std::ostream& log) {
  RunConfig config = load_run_config(args.config);
  if (args.out) config.output_dir = args.out->string();
  const ToyWorld world(config.world);
  const ScribbleSet scribbles = load_scribble_set(args.scribbles, world.resolution());
  const DiffusionSchedule schedule = config.schedule.build();
  const std::size_t target =
      config.target_template ? *config.target_template : infer_target(world, scribbles);
  if (target >= world.template_count()) {
    throw InputError("target_template " + std::to_string(target) + " is out of range (world has " +
                     std::to_string(world.template_count()) + " templates)");
  }

  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved_config.json", resolved_config_json(config));
  log << "generate: " << config.seeds.size() << " seed(s), " << world.template_count()
      << " templates, target " << target << ", output " << out_dir.string() << "\n";

  std::vector<EvalReport> reports(config.seeds.size());
  parallel_for(config.seeds.size(), config.workers, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    const TrialResult trial = run_trial(world, scribbles, config.guidance, schedule, seed, target);
    const fs::path dir = out_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    write_pgm(dir / "image.pgm", trial.sample.final_state.x);
    write_pgm(dir / "decoded.pgm", world.templates()[trial.decoded.template_index].image);
    write_text(dir / "diagnostics.json", diagnostics_json(trial.sample));
    write_text(dir / "metrics.json", to_json(trial.report));
    reports[i] = trial.report;
  });

  ordered_json summary = ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    ordered_json e;
    e["seed"] = config.seeds[i];
    e["scribble_ratio"] = reports[i].scribble_ratio;
    e["miou"] = reports[i].miou;
    e["orientation_error_deg"] = reports[i].orientation_error_deg;
    summary.push_back(std::move(e));
    log << "  seed " << config.seeds[i] << ": ratio " << reports[i].scribble_ratio << ", miou "
        << reports[i].miou << ", orientation error " << reports[i].orientation_error_deg
        << " deg\n";
  }
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return kOk;
}

}  // namespace sgd::cli
