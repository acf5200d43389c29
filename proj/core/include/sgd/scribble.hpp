#pragma once

#include <compare>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sgd/grid.hpp"

namespace sgd {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Integer cell coordinate (x = column, y = row).
struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class StrokeKind { polyline, bezier };

struct ScribbleGeometry {
  StrokeKind kind = StrokeKind::polyline;
  std::vector<Point2> points;
  int thickness = 1;

  /// Throws InputError when the point count, thickness or spread is invalid.
  void validate() const;
};

/// Number of uniform parameter steps used to flatten a Bezier curve.
inline constexpr int kBezierSegments = 64;

/// Binary mask of the stroke: Bresenham segments between rounded vertices,
/// dilated by a Chebyshev radius of thickness/2, clipped to the image.
Grid2D rasterize(const ScribbleGeometry& geometry, int width, int height);

/// Inclusive cell box.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Tight bounding box of the set cells, each side pushed out by
/// (pad_fraction / 2) of the box extent, floored/ceiled and clipped.
Box padded_bbox(const Grid2D& mask, double pad_fraction = 0.05);

/// Set cells with at least one unset 8-neighbour. Cells outside the grid count
/// as unset. Returned in row-major order.
std::vector<Cell> boundary_anchors(const Grid2D& region);

/// One user stroke. `mask` is the region S the losses compare against; it
/// starts as the rasterized stroke and may later be grown by propagation.
struct Scribble {
  ScribbleGeometry geometry;
  Grid2D mask;
  std::vector<std::string> tokens;
};

struct ScribbleSet {
  int width = 0;
  int height = 0;
  std::vector<Scribble> scribbles;

  std::size_t size() const noexcept { return scribbles.size(); }
  bool empty() const noexcept { return scribbles.empty(); }
  /// Throws InputError if empty, if a mask has the wrong shape or no set cell,
  /// or if a scribble has no tokens.
  void validate() const;
};

/// Rasterizes `geometry` into a scribble for a `width` x `height` canvas.
Scribble make_scribble(ScribbleGeometry geometry, std::vector<std::string> tokens, int width,
                       int height);

/// Parses the scribble JSON format and rasterizes every stroke at
/// `resolution` x `resolution`, rescaling coordinates from the file's own
/// width/height.
ScribbleSet parse_scribble_set(std::string_view json_text, int resolution);
ScribbleSet load_scribble_set(const std::filesystem::path& path, int resolution);

}  // namespace sgd
