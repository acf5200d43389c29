#include "sgd/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sgd/errors.hpp"

namespace sgd {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw InputError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

WorldSpec parse_world(const json& j) {
  reject_unknown(j,
                 {"resolution", "classes", "orientations_deg", "center_grid", "center_spacing",
                  "centers", "sigma_major", "sigma_minor", "logit_scale", "bandwidth",
                  "compose_classes", "priors"},
                 "world");
  WorldSpec w;
  read(j, "resolution", w.resolution);
  read(j, "classes", w.classes);
  read(j, "orientations_deg", w.orientations_deg);
  read(j, "center_grid", w.center_grid);
  read(j, "center_spacing", w.center_spacing);
  if (j.contains("centers")) {
    w.centers.clear();
    for (const json& c : j.at("centers")) {
      if (!c.is_array() || c.size() != 2) throw InputError("world.centers entries must be [x, y]");
      w.centers.push_back({c[0].get<double>(), c[1].get<double>()});
    }
  }
  read(j, "sigma_major", w.sigma_major);
  read(j, "sigma_minor", w.sigma_minor);
  read(j, "logit_scale", w.logit_scale);
  read(j, "bandwidth", w.bandwidth);
  read(j, "compose_classes", w.compose_classes);
  read(j, "priors", w.priors);
  return w;
}

GuidanceConfig parse_guidance(const json& j) {
  reject_unknown(j,
                 {"alpha", "beta", "lambda1", "lambda2", "centroid_units", "w_focal", "w_moment",
                  "guidance_scale", "omega", "eta_ddim", "propagation", "tau", "top_k", "k1", "k2",
                  "agg_resolutions", "agg_weights", "anchor_factor"},
                 "guidance");
  GuidanceConfig g;
  read(j, "alpha", g.alpha);
  read(j, "beta", g.beta);
  read(j, "lambda1", g.lambda1);
  read(j, "lambda2", g.lambda2);
  if (j.contains("centroid_units")) {
    const auto units = j.at("centroid_units").get<std::string>();
    if (units == "normalized") {
      g.centroid_units = CentroidUnits::normalized;
    } else if (units == "cells") {
      g.centroid_units = CentroidUnits::cells;
    } else {
      throw InputError("guidance.centroid_units must be \"normalized\" or \"cells\"");
    }
  }
  read(j, "w_focal", g.w_focal);
  read(j, "w_moment", g.w_moment);
  read(j, "guidance_scale", g.guidance_scale);
  read(j, "omega", g.omega);
  read(j, "eta_ddim", g.eta_ddim);
  read(j, "propagation", g.propagation);
  read(j, "tau", g.tau);
  read(j, "top_k", g.top_k);
  read(j, "k1", g.k1);
  read(j, "k2", g.k2);
  read(j, "agg_resolutions", g.agg_resolutions);
  read(j, "agg_weights", g.agg_weights);
  read(j, "anchor_factor", g.anchor_factor);
  return g;
}

ScheduleSpec parse_schedule(const json& j) {
  reject_unknown(j, {"T", "beta_start", "beta_end", "steps"}, "schedule");
  ScheduleSpec s;
  read(j, "T", s.total_steps);
  read(j, "beta_start", s.beta_start);
  read(j, "beta_end", s.beta_end);
  read(j, "steps", s.inference_steps);
  return s;
}

}  // namespace

void RunConfig::validate() {
  guidance.validate();
  if (seeds.empty()) throw InputError("seeds must not be empty");
  if (workers < 0) throw InputError("workers must be >= 0");
  for (int r : guidance.agg_resolutions) {
    if (world.resolution % r != 0) {
      throw InputError("agg resolution " + std::to_string(r) +
                       " does not divide the world resolution");
    }
  }
  if (world.resolution % guidance.anchor_factor != 0) {
    throw InputError("anchor_factor must divide the world resolution");
  }
  (void)schedule.build();
}

RunConfig parse_run_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown(doc, {"world", "guidance", "schedule", "seeds", "target_template",
                         "output_dir", "workers"},
                   "config");
    RunConfig c;
    if (doc.contains("world")) c.world = parse_world(doc.at("world"));
    if (doc.contains("guidance")) c.guidance = parse_guidance(doc.at("guidance"));
    if (doc.contains("schedule")) c.schedule = parse_schedule(doc.at("schedule"));
    if (doc.contains("seeds")) {
      const json& s = doc.at("seeds");
      c.seeds = s.is_array() ? s.get<std::vector<std::uint64_t>>()
                             : std::vector<std::uint64_t>{s.get<std::uint64_t>()};
    }
    if (doc.contains("target_template") && !doc.at("target_template").is_null()) {
      c.target_template = doc.at("target_template").get<std::size_t>();
    }
    read(doc, "output_dir", c.output_dir);
    read(doc, "workers", c.workers);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_run_config(text.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string resolved_config_json(const RunConfig& c) {
  ordered_json w;
  w["resolution"] = c.world.resolution;
  w["classes"] = c.world.classes;
  w["orientations_deg"] = c.world.orientations_deg;
  w["center_grid"] = c.world.center_grid;
  w["center_spacing"] = c.world.center_spacing;
  w["centers"] = ordered_json::array();
  for (const Point2& p : c.world.centers) w["centers"].push_back({p.x, p.y});
  w["sigma_major"] = c.world.sigma_major;
  w["sigma_minor"] = c.world.sigma_minor;
  w["logit_scale"] = c.world.logit_scale;
  w["bandwidth"] = c.world.bandwidth;
  w["compose_classes"] = c.world.compose_classes;
  w["priors"] = c.world.priors;

  const GuidanceConfig& g = c.guidance;
  ordered_json gj;
  gj["alpha"] = g.alpha;
  gj["beta"] = g.beta;
  gj["lambda1"] = g.lambda1;
  gj["lambda2"] = g.lambda2;
  gj["centroid_units"] = g.centroid_units == CentroidUnits::normalized ? "normalized" : "cells";
  gj["w_focal"] = g.w_focal;
  gj["w_moment"] = g.w_moment;
  gj["guidance_scale"] = g.guidance_scale;
  gj["omega"] = g.omega;
  gj["eta_ddim"] = g.eta_ddim;
  gj["propagation"] = g.propagation;
  gj["tau"] = g.tau;
  gj["top_k"] = g.top_k;
  gj["k1"] = g.k1;
  gj["k2"] = g.k2;
  gj["agg_resolutions"] = g.agg_resolutions;
  gj["agg_weights"] = g.agg_weights;
  gj["anchor_factor"] = g.anchor_factor;

  ordered_json s;
  s["T"] = c.schedule.total_steps;
  s["beta_start"] = c.schedule.beta_start;
  s["beta_end"] = c.schedule.beta_end;
  s["steps"] = c.schedule.inference_steps;

  ordered_json doc;
  doc["world"] = std::move(w);
  doc["guidance"] = std::move(gj);
  doc["schedule"] = std::move(s);
  doc["seeds"] = c.seeds;
  doc["target_template"] = c.target_template ? ordered_json(*c.target_template) : ordered_json();
  doc["output_dir"] = c.output_dir;
  doc["workers"] = c.workers;
  return doc.dump(2) + "\n";
}

}  // namespace sgd
