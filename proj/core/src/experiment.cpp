#include "sgd/experiment.hpp"

#include <cmath>

#include "sgd/errors.hpp"
#include "sgd/moments.hpp"
#include "sgd/rng.hpp"

namespace sgd {

ScribbleSet oriented_scribbles(const ToyWorld& world, std::size_t template_index,
                               double half_length, int thickness) {
  const Template& t = world.templates().at(template_index);
  const int n = world.resolution();
  ScribbleSet set;
  set.width = n;
  set.height = n;
  for (std::size_t cls = 0; cls < t.truth.size(); ++cls) {
    const ObjectTruth& obj = t.truth[cls];
    if (!obj.present) continue;
    const double dx = half_length * std::cos(obj.theta);
    const double dy = half_length * std::sin(obj.theta);
    ScribbleGeometry g;
    g.points = {{obj.center.x - dx, obj.center.y - dy}, {obj.center.x + dx, obj.center.y + dy}};
    g.thickness = thickness;
    set.scribbles.push_back(make_scribble(std::move(g), {world.classes()[cls]}, n, n));
  }
  return set;
}

std::size_t draw_target(const ToyWorld& world, std::uint64_t seed) {
  // A separate stream so the target never shifts the sampler's noise.
  Rng rng(seed ^ 0x5851f42d4c957f2dULL);
  return static_cast<std::size_t>(rng.below(world.template_count()));
}

std::size_t infer_target(const ToyWorld& world, const ScribbleSet& scribbles) {
  std::vector<int> classes;
  for (const Scribble& s : scribbles.scribbles) {
    if (s.tokens.empty()) throw InputError("scribble without tokens");
    classes.push_back(world.class_index(s.tokens.front()));
  }
  const std::vector<std::uint8_t> ok = world.eligible(classes);
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < world.template_count(); ++i) {
    if (!ok[i]) continue;
    double score = 0.0;
    for (std::size_t k = 0; k < scribbles.size(); ++k) {
      const Grid2D& mask = scribbles.scribbles[k].mask;
      const Grid2D& soft = world.templates()[i].masks[static_cast<std::size_t>(classes[k])];
      double covered = 0.0;
      for (std::size_t c = 0; c < mask.size(); ++c) covered += mask[c] > 0.5 ? soft[c] : 0.0;
      score += covered / static_cast<double>(mask.count_set());
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

EvalReport evaluate_sample(const ToyWorld& world, const ScribbleSet& scribbles,
                           const DecodedSample& decoded, std::size_t target_template) {
  const Template& target = world.templates().at(target_template);
  EvalReport report;
  std::size_t cells = 0;
  std::size_t covered = 0;
  double iou_sum = 0.0;
  double err_sum = 0.0;
  for (const Scribble& s : scribbles.scribbles) {
    const auto cls = static_cast<std::size_t>(world.class_index(s.tokens.front()));
    const Grid2D& object = decoded.masks.at(cls);
    ScribbleReport entry;
    entry.tokens = s.tokens;
    entry.ratio = scribble_ratio(s.mask, object);
    // Direction the stroke asks for: the principal axis of its own cells.
    const MomentSummary stroke = moment_summary(s.mask);
    entry.orientation_error_deg =
        decoded.truth.at(cls).present && !stroke.isotropic
            ? orientation_error_deg(decoded.truth[cls].theta, stroke.theta)
            : 0.0;
    const std::size_t n = s.mask.count_set();
    cells += n;
    covered += static_cast<std::size_t>(std::llround(entry.ratio * static_cast<double>(n)));
    Grid2D gt(object.width(), object.height());
    for (std::size_t c = 0; c < gt.size(); ++c) gt[c] = target.masks[cls][c] >= 0.5 ? 1.0 : 0.0;
    iou_sum += miou(object, gt);
    err_sum += entry.orientation_error_deg;
    report.scribble_ratio_mean += entry.ratio;
    report.per_scribble.push_back(std::move(entry));
  }
  const double k = static_cast<double>(scribbles.size());
  report.scribble_ratio = static_cast<double>(covered) / static_cast<double>(cells);
  report.scribble_ratio_mean /= k;
  report.miou = iou_sum / k;
  report.orientation_error_deg = err_sum / k;
  return report;
}

TrialResult run_trial(const ToyWorld& world, const ScribbleSet& scribbles,
                      const GuidanceConfig& cfg, const DiffusionSchedule& schedule,
                      std::uint64_t seed, std::optional<std::size_t> target_template,
                      const SampleOptions& options) {
  TrialResult out;
  out.target_template = target_template ? *target_template : infer_target(world, scribbles);
  if (out.target_template >= world.template_count()) {
    throw InputError("target_template " + std::to_string(out.target_template) +
                     " is out of range");
  }
  Rng rng(seed);
  out.sample = guided_sample(world, scribbles, cfg, schedule, rng, options);
  out.decoded = decode_final(world, out.sample.final_state.x, schedule);
  out.report = evaluate_sample(world, scribbles, out.decoded, out.target_template);
  return out;
}

}  // namespace sgd
