#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "sgd/errors.hpp"
#include "sgd/metrics.hpp"

using namespace sgd;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Grid2D box(int n, int x0, int y0, int x1, int y1) {
  Grid2D g(n, n);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) g.at(x, y) = 1.0;
  }
  return g;
}

Grid2D shifted(const Grid2D& g, int dx, int dy) {
  Grid2D out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (out.contains(x + dx, y + dy)) out.at(x + dx, y + dy) = g.at(x, y);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("scribble ratio examples") {
    const Grid2D stroke = box(12, 1, 3, 10, 3);  // 10 cells
    CHECK(scribble_ratio(stroke, box(12, 0, 0, 11, 11)) == 1.0);
    CHECK(scribble_ratio(stroke, box(12, 0, 5, 11, 11)) == 0.0);
    CHECK(scribble_ratio(stroke, box(12, 0, 0, 5, 11)) == 0.5);
    CHECK_THROWS_AS(scribble_ratio(Grid2D(12, 12), stroke), InputError);
    CHECK_THROWS_AS(scribble_ratio(stroke, Grid2D(4, 4)), InputError);
  }

  TEST_CASE("mIoU examples") {
    const Grid2D full = box(8, 0, 0, 7, 7);
    CHECK(miou(full, full) == 1.0);
    CHECK(miou(box(8, 0, 0, 3, 7), box(8, 4, 0, 7, 7)) == 0.0);
    CHECK(miou(box(8, 0, 0, 3, 7), full) == 0.5);
    CHECK(miou(Grid2D(8, 8), Grid2D(8, 8)) == 1.0);
    CHECK_THROWS_AS(miou(full, Grid2D(4, 4)), InputError);
  }

  TEST_CASE("orientation error examples") {
    CHECK(orientation_error_deg(0.4, 0.4) == 0.0);
    CHECK(orientation_error_deg(0.0, std::numbers::pi) == 0.0);
    CHECK(std::abs(orientation_error_deg(10 * kDeg, 170 * kDeg) - 20.0) <= 1e-12);
    CHECK(std::abs(orientation_error_deg(0.0, 90 * kDeg) - 90.0) <= 1e-12);
  }

  TEST_CASE("translation invariance") {
    Rng rng(8);
    for (int k = 0; k < 50; ++k) {
      Grid2D s(20, 20);
      Grid2D m(20, 20);
      // Keep the content away from the border so shifts lose nothing.
      for (int y = 5; y < 15; ++y) {
        for (int x = 5; x < 15; ++x) {
          s.at(x, y) = rng.uniform() < 0.3 ? 1.0 : 0.0;
          m.at(x, y) = rng.uniform() < 0.5 ? 1.0 : 0.0;
        }
      }
      s.at(10, 10) = 1.0;
      const int dx = static_cast<int>(rng.below(9)) - 4;
      const int dy = static_cast<int>(rng.below(9)) - 4;
      CHECK(scribble_ratio(shifted(s, dx, dy), shifted(m, dx, dy)) == scribble_ratio(s, m));
      CHECK(miou(shifted(s, dx, dy), shifted(m, dx, dy)) == miou(s, m));
    }
  }

  TEST_CASE("orientation error is a metric on the axis circle") {
    Rng rng(9);
    for (int k = 0; k < 1000; ++k) {
      const double a = (rng.uniform() * 4 - 2) * std::numbers::pi;
      const double b = (rng.uniform() * 4 - 2) * std::numbers::pi;
      const double c = (rng.uniform() * 4 - 2) * std::numbers::pi;
      const double ab = orientation_error_deg(a, b);
      CHECK(ab == orientation_error_deg(b, a));
      CHECK((ab >= 0.0 && ab <= 90.0));
      CHECK(ab <= orientation_error_deg(a, c) + orientation_error_deg(c, b) + 1e-9);
      CHECK(std::abs(ab - oracle::axis_distance(a, b) / kDeg) <= 1e-9);
    }
  }

  TEST_CASE("report JSON round trip") {
    EvalReport r;
    r.scribble_ratio = 0.75;
    r.scribble_ratio_mean = 0.5;
    r.miou = 0.125;
    r.orientation_error_deg = 3.5;
    r.per_scribble = {{{"blob"}, 0.5, 3.5}};
    const EvalReport back = eval_report_from_json(to_json(r));
    CHECK(back.scribble_ratio == r.scribble_ratio);
    CHECK(back.scribble_ratio_mean == r.scribble_ratio_mean);
    CHECK(back.miou == r.miou);
    CHECK(back.orientation_error_deg == r.orientation_error_deg);
    REQUIRE(back.per_scribble.size() == 1);
    CHECK(back.per_scribble[0].tokens == std::vector<std::string>{"blob"});
    CHECK(back.per_scribble[0].ratio == 0.5);
    CHECK_THROWS_AS(eval_report_from_json(R"({"miou": 1.0})"), InputError);
    CHECK_THROWS_AS(eval_report_from_json("not json"), InputError);
  }
}
