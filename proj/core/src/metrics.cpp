#include "sgd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

#include "sgd/errors.hpp"
#include "sgd/moments.hpp"

namespace sgd {

namespace {

void check_shape(const Grid2D& a, const Grid2D& b, const char* what) {
  if (!a.same_shape(b)) throw InputError(std::string(what) + ": mask shapes differ");
}

}  // namespace

double scribble_ratio(const Grid2D& scribble_mask, const Grid2D& object_mask) {
  check_shape(scribble_mask, object_mask, "scribble_ratio");
  std::size_t s = 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scribble_mask.size(); ++i) {
    if (scribble_mask[i] > 0.5) {
      ++s;
      if (object_mask[i] > 0.5) ++hit;
    }
  }
  if (s == 0) throw InputError("scribble_ratio: empty scribble");
  return static_cast<double>(hit) / static_cast<double>(s);
}

double miou(const Grid2D& pred, const Grid2D& gt) {
  check_shape(pred, gt, "miou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] > 0.5;
    const bool g = gt[i] > 0.5;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double orientation_error_deg(double theta_a, double theta_b) {
  // Reduce |a - b| rather than the signed difference so swapping the
  // arguments gives bit-identical results.
  const double d = std::fmod(std::abs(theta_a - theta_b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d) * 180.0 / std::numbers::pi;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["scribble_ratio"] = report.scribble_ratio;
  j["scribble_ratio_mean"] = report.scribble_ratio_mean;
  j["miou"] = report.miou;
  j["orientation_error_deg"] = report.orientation_error_deg;
  j["per_scribble"] = nlohmann::ordered_json::array();
  for (const ScribbleReport& s : report.per_scribble) {
    nlohmann::ordered_json e;
    e["tokens"] = s.tokens;
    e["ratio"] = s.ratio;
    e["orientation_error_deg"] = s.orientation_error_deg;
    j["per_scribble"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    auto number = [&](const char* key) {
      if (!j.contains(key) || !j.at(key).is_number()) {
        throw InputError(std::string("missing numeric key '") + key + "'");
      }
      return j.at(key).get<double>();
    };
    EvalReport r;
    r.scribble_ratio = number("scribble_ratio");
    r.miou = number("miou");
    r.orientation_error_deg = number("orientation_error_deg");
    r.scribble_ratio_mean = j.contains("scribble_ratio_mean") ? number("scribble_ratio_mean")
                                                              : r.scribble_ratio;
    if (!j.contains("per_scribble") || !j.at("per_scribble").is_array()) {
      throw InputError("missing array 'per_scribble'");
    }
    for (const auto& e : j.at("per_scribble")) {
      ScribbleReport s;
      s.tokens = e.at("tokens").get<std::vector<std::string>>();
      s.ratio = e.at("ratio").get<double>();
      s.orientation_error_deg = e.at("orientation_error_deg").get<double>();
      r.per_scribble.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(e.what());
  }
}

}  // namespace sgd
