#include "sgd/scribble.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sgd/errors.hpp"

namespace sgd {

void ScribbleGeometry::validate() const {
  const std::size_t min_points = kind == StrokeKind::polyline ? 2 : 3;
  if (points.size() < min_points) {
    throw InputError(std::string(kind == StrokeKind::polyline ? "polyline" : "bezier") +
                     " needs at least " + std::to_string(min_points) + " points");
  }
  if (thickness < 1) throw InputError("scribble thickness must be >= 1");
  for (const Point2& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InputError("scribble coordinates must be finite");
    }
  }
  const bool degenerate = std::all_of(points.begin(), points.end(), [&](const Point2& p) {
    return p.x == points.front().x && p.y == points.front().y;
  });
  if (degenerate) throw InputError("degenerate scribble: all points identical");
}

namespace {

std::vector<Point2> flatten_bezier(const std::vector<Point2>& control) {
  std::vector<Point2> out;
  out.reserve(kBezierSegments + 1);
  std::vector<Point2> work(control.size());
  for (int k = 0; k <= kBezierSegments; ++k) {
    const double t = static_cast<double>(k) / kBezierSegments;
    work = control;
    // de Casteljau
    for (std::size_t level = control.size() - 1; level > 0; --level) {
      for (std::size_t i = 0; i < level; ++i) {
        work[i].x = (1.0 - t) * work[i].x + t * work[i + 1].x;
        work[i].y = (1.0 - t) * work[i].y + t * work[i + 1].y;
      }
    }
    out.push_back(work[0]);
  }
  return out;
}

Cell round_cell(const Point2& p) {
  return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))};
}

void stamp(Grid2D& mask, Cell c, int radius) {
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = c.x + dx;
      const int y = c.y + dy;
      if (mask.contains(x, y)) mask.at(x, y) = 1.0;
    }
  }
}

void draw_segment(Grid2D& mask, Cell a, Cell b, int radius) {
  int x = a.x;
  int y = a.y;
  const int dx = std::abs(b.x - a.x);
  const int dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1;
  const int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    stamp(mask, {x, y}, radius);
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

}  // namespace

Grid2D rasterize(const ScribbleGeometry& geometry, int width, int height) {
  geometry.validate();
  if (width < 1 || height < 1) throw InputError("rasterize: canvas must be at least 1x1");

  const std::vector<Point2> path = geometry.kind == StrokeKind::bezier
                                       ? flatten_bezier(geometry.points)
                                       : geometry.points;
  const int radius = geometry.thickness / 2;
  Grid2D mask(width, height);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    draw_segment(mask, round_cell(path[i]), round_cell(path[i + 1]), radius);
  }
  return mask;
}

Box padded_bbox(const Grid2D& mask, double pad_fraction) {
  if (mask.empty()) throw InputError("padded_bbox: empty grid");
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) > 0.5) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) throw InputError("padded_bbox: mask has no set cells");

  const double pad_x = 0.5 * pad_fraction * (x1 - x0);
  const double pad_y = 0.5 * pad_fraction * (y1 - y0);
  Box box;
  box.x0 = std::max(0, static_cast<int>(std::floor(x0 - pad_x)));
  box.y0 = std::max(0, static_cast<int>(std::floor(y0 - pad_y)));
  box.x1 = std::min(mask.width() - 1, static_cast<int>(std::ceil(x1 + pad_x)));
  box.y1 = std::min(mask.height() - 1, static_cast<int>(std::ceil(y1 + pad_y)));
  return box;
}

std::vector<Cell> boundary_anchors(const Grid2D& region) {
  if (region.empty()) throw InputError("boundary_anchors: empty grid");
  std::vector<Cell> out;
  bool any = false;
  for (int y = 0; y < region.height(); ++y) {
    for (int x = 0; x < region.width(); ++x) {
      if (region.at(x, y) <= 0.5) continue;
      any = true;
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy) {
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          edge = !region.contains(nx, ny) || region.at(nx, ny) <= 0.5;
        }
      }
      if (edge) out.push_back({x, y});
    }
  }
  if (!any) throw InputError("boundary_anchors: region has no set cells");
  return out;
}

void ScribbleSet::validate() const {
  if (scribbles.empty()) throw InputError("scribble set is empty");
  for (std::size_t i = 0; i < scribbles.size(); ++i) {
    const Scribble& s = scribbles[i];
    const std::string tag = "scribble " + std::to_string(i);
    if (s.tokens.empty()) throw InputError(tag + " has no tokens");
    if (s.mask.width() != width || s.mask.height() != height) {
      throw InputError(tag + " mask does not match the set dimensions");
    }
    if (s.mask.count_set() == 0) throw InputError(tag + " mask is empty");
  }
}

Scribble make_scribble(ScribbleGeometry geometry, std::vector<std::string> tokens, int width,
                       int height) {
  if (tokens.empty()) throw InputError("scribble needs at least one token");
  Grid2D mask = rasterize(geometry, width, height);
  if (mask.count_set() == 0) throw InputError("scribble lies entirely outside the image");
  return Scribble{std::move(geometry), std::move(mask), std::move(tokens)};
}

}  // namespace sgd
