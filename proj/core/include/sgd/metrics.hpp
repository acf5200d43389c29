#pragma once

#include <string>
#include <vector>

#include "sgd/grid.hpp"

namespace sgd {

/// |S n M| / |S| over binary masks (cells > 0.5). Throws InputError on a
/// shape mismatch or an empty scribble.
double scribble_ratio(const Grid2D& scribble_mask, const Grid2D& object_mask);

/// |P n G| / |P u G|; 1 when both are empty.
double miou(const Grid2D& pred, const Grid2D& gt);

/// Smallest difference between two axes (angles modulo pi), in degrees.
double orientation_error_deg(double theta_a, double theta_b);

struct ScribbleReport {
  std::vector<std::string> tokens;
  double ratio = 0.0;
  double orientation_error_deg = 0.0;
};

struct EvalReport {
  double scribble_ratio = 0.0;  // pooled over every scribble cell
  double scribble_ratio_mean = 0.0;  // mean of the per-scribble ratios
  double miou = 0.0;
  double orientation_error_deg = 0.0;
  std::vector<ScribbleReport> per_scribble;
};

std::string to_json(const EvalReport& report);
/// Throws InputError when a required key is missing or has the wrong type.
EvalReport eval_report_from_json(const std::string& text);

}  // namespace sgd
