#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rbc/image.hpp"

namespace rbc {

struct Point {
  int x = 0, y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct PointF {
  double x = 0.0, y = 0.0;
};

/// Signed shoelace area; positive for counter-clockwise in a y-up frame.
double signed_area(std::span<const PointF> poly);

/// Convex hull by monotone chain, counter-clockwise (y-up), no collinear points.
std::vector<PointF> convex_hull(std::vector<PointF> pts);

double polygon_perimeter(std::span<const PointF> poly);

/// True when (px, py) lies inside or on the boundary of the closed polygon.
bool point_in_polygon(std::span<const Point> poly, double px, double py);

/// Rasterizes a closed integer polygon into a mask the size of `frame`,
/// marking pixel centres that lie inside or on the polygon. Coordinates are
/// shifted by (-frame.x, -frame.y).
BinaryImage fill_polygon(std::span<const Point> poly, const Rect& frame);

struct Ellipse {
  double cx = 0, cy = 0;
  double semi_major = 0, semi_minor = 0;
  double angle = 0;  // radians, major-axis direction

  /// Normalised radial distance: < 1 inside, 1 on the curve.
  double radial(double x, double y) const;
};

/// Direct least-squares conic fit constrained to ellipses (4ac - b^2 = 1),
/// using the numerically stable block-eigen formulation. Empty when the
/// points are degenerate (collinear, fewer than 6, or no elliptic solution).
std::optional<Ellipse> fit_ellipse(std::span<const PointF> pts);

/// Extremes of the caliper width over all directions of a convex polygon.
struct Calipers {
  double min_width = 0;    // min Feret
  double max_width = 0;    // max Feret (diameter)
  double rect_length = 0;  // minimum-area bounding rectangle sides
  double rect_width = 0;
};
Calipers rotating_calipers(std::span<const PointF> hull);

}  // namespace rbc
