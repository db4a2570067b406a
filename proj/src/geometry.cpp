#include "rbc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace rbc {

double signed_area(std::span<const PointF> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PointF& a = poly[i];
    const PointF& b = poly[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

namespace {

double cross(const PointF& o, const PointF& a, const PointF& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

std::vector<PointF> convex_hull(std::vector<PointF> pts) {
  std::sort(pts.begin(), pts.end(), [](const PointF& a, const PointF& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const PointF& a, const PointF& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;

  std::vector<PointF> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_perimeter(std::span<const PointF> poly) {
  const std::size_t n = poly.size();
  if (n < 2) return 0.0;
  double p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PointF& a = poly[i];
    const PointF& b = poly[(i + 1) % n];
    p += std::hypot(b.x - a.x, b.y - a.y);
  }
  return p;
}

bool point_in_polygon(std::span<const Point> poly, double px, double py) {
  const std::size_t n = poly.size();
  if (n == 0) return false;
  if (n == 1) return poly[0].x == px && poly[0].y == py;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double xi = poly[i].x, yi = poly[i].y;
    const double xj = poly[j].x, yj = poly[j].y;
    // On-segment test first so the boundary counts as inside.
    const double cr = (xj - xi) * (py - yi) - (yj - yi) * (px - xi);
    if (cr == 0.0 && px >= std::min(xi, xj) && px <= std::max(xi, xj) &&
        py >= std::min(yi, yj) && py <= std::max(yi, yj))
      return true;
    if ((yi > py) != (yj > py)) {
      const double x_cross = xi + (py - yi) * (xj - xi) / (yj - yi);
      if (px < x_cross) inside = !inside;
    }
  }
  return inside;
}

BinaryImage fill_polygon(std::span<const Point> poly, const Rect& frame) {
  BinaryImage out(frame.width, frame.height, 0);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      if (point_in_polygon(poly, x + frame.x, y + frame.y)) out.at(x, y) = 1;
  return out;
}

double Ellipse::radial(double x, double y) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dx = x - cx, dy = y - cy;
  const double u = (dx * c + dy * s) / semi_major;
  const double v = (-dx * s + dy * c) / semi_minor;
  return std::sqrt(u * u + v * v);
}

std::optional<Ellipse> fit_ellipse(std::span<const PointF> pts) {
  const std::size_t n = pts.size();
  if (n < 6) return std::nullopt;

  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double scale = 0;
  for (const auto& p : pts) scale += (p.x - mx) * (p.x - mx) + (p.y - my) * (p.y - my);
  scale = std::sqrt(scale / n);
  if (scale <= 0) return std::nullopt;

  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (pts[i].x - mx) / scale;
    const double y = (pts[i].y - my) / scale;
    d1.row(i) << x * x, x * y, y * y;
    d2.row(i) << x, y, 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;

  Eigen::FullPivLU<Eigen::Matrix3d> lu(s3);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3) return std::nullopt;  // collinear support

  const Eigen::Matrix3d t = -lu.inverse() * s2.transpose();
  const Eigen::Matrix3d m = s1 + s2 * t;
  Eigen::Matrix3d reduced;
  reduced.row(0) = m.row(2) / 2.0;
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> es(reduced);
  if (es.info() != Eigen::Success) return std::nullopt;
  int best = -1;
  double best_cond = 0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(es.eigenvalues()[k].imag()) > 1e-12) continue;
    const Eigen::Vector3d v = es.eigenvectors().col(k).real();
    const double cond = 4 * v[0] * v[2] - v[1] * v[1];
    if (cond > best_cond) {
      best_cond = cond;
      best = k;
    }
  }
  if (best < 0) return std::nullopt;
  const Eigen::Vector3d a1 = es.eigenvectors().col(best).real();
  const Eigen::Vector3d a2 = t * a1;

  const double A = a1[0], B = a1[1], C = a1[2], D = a2[0], E = a2[1], F = a2[2];
  const double den = B * B - 4 * A * C;
  if (den >= 0) return std::nullopt;
  const double x0 = (2 * C * D - B * E) / den;
  const double y0 = (2 * A * E - B * D) / den;
  const double f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F;

  Eigen::Matrix2d q;
  q << A, B / 2, B / 2, C;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qs(q);
  const double l0 = qs.eigenvalues()[0], l1 = qs.eigenvalues()[1];
  const double r0 = -f0 / l0, r1 = -f0 / l1;
  if (!(r0 > 0 && r1 > 0) || !std::isfinite(r0) || !std::isfinite(r1)) return std::nullopt;

  // The smaller eigenvalue owns the longer axis.
  const double ax0 = std::sqrt(r0), ax1 = std::sqrt(r1);
  const int major = ax0 >= ax1 ? 0 : 1;
  const Eigen::Vector2d dir = qs.eigenvectors().col(major);

  Ellipse e;
  e.cx = x0 * scale + mx;
  e.cy = y0 * scale + my;
  e.semi_major = std::max(ax0, ax1) * scale;
  e.semi_minor = std::min(ax0, ax1) * scale;
  e.angle = std::atan2(dir[1], dir[0]);
  return e;
}

Calipers rotating_calipers(std::span<const PointF> hull) {
  Calipers c;
  const std::size_t n = hull.size();
  if (n == 0) return c;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      c.max_width = std::max(c.max_width, std::hypot(hull[i].x - hull[j].x, hull[i].y - hull[j].y));
  if (n < 3) {
    c.rect_length = c.max_width;
    return c;
  }

  c.min_width = std::numeric_limits<double>::infinity();
  double best_area = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const PointF& a = hull[i];
    const PointF& b = hull[(i + 1) % n];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0) continue;
    const double ux = (b.x - a.x) / len, uy = (b.y - a.y) / len;
    double umin = 0, umax = 0, vmin = 0, vmax = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double dx = hull[k].x - a.x, dy = hull[k].y - a.y;
      const double u = dx * ux + dy * uy;
      const double v = -dx * uy + dy * ux;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    const double width = vmax - vmin, length = umax - umin;
    c.min_width = std::min(c.min_width, width);
    if (width * length < best_area) {
      best_area = width * length;
      c.rect_length = std::max(width, length);
      c.rect_width = std::min(width, length);
    }
  }
  return c;
}

}  // namespace rbc
