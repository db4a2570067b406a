#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Dense>

#include "rbc/features.hpp"

namespace rbc {

double contour_perimeter(std::span<const Point> contour) {
  const std::size_t n = contour.size();
  if (n < 2) return 0.0;
  std::vector<int> code(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = contour[i];
    const Point& b = contour[(i + 1) % n];
    const int dx = b.x - a.x, dy = b.y - a.y;
    // Freeman code; diagonal moves are odd.
    static constexpr int table[3][3] = {{5, 4, 3}, {6, -1, 2}, {7, 0, 1}};
    code[i] = table[dx + 1][dy + 1];
  }
  double even = 0, odd = 0, corners = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (code[i] % 2 ? odd : even) += 1;
    if (code[i] != code[(i + 1) % n]) corners += 1;
  }
  return 0.980 * even + 1.406 * odd - 0.091 * corners;
}

std::array<double, 7> hu_moments(const BinaryImage& mask) {
  double m00 = 0, m10 = 0, m01 = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        m00 += 1;
        m10 += x;
        m01 += y;
      }
  if (m00 == 0) throw_data("hu_moments: empty region");
  const double cx = m10 / m00, cy = m01 / m00;
  double mu[4][4] = {};
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        const double dx = x - cx, dy = y - cy;
        double px = 1;
        for (int p = 0; p <= 3; ++p) {
          double py = 1;
          for (int q = 0; p + q <= 3; ++q) {
            mu[p][q] += px * py;
            py *= dy;
          }
          px *= dx;
        }
      }
  auto eta = [&](int p, int q) { return mu[p][q] / std::pow(m00, 1.0 + (p + q) / 2.0); };
  const double n20 = eta(2, 0), n02 = eta(0, 2), n11 = eta(1, 1);
  const double n30 = eta(3, 0), n03 = eta(0, 3), n21 = eta(2, 1), n12 = eta(1, 2);
  const double a = n30 + n12, b = n21 + n03;
  std::array<double, 7> h;
  h[0] = n20 + n02;
  h[1] = (n20 - n02) * (n20 - n02) + 4 * n11 * n11;
  h[2] = (n30 - 3 * n12) * (n30 - 3 * n12) + (3 * n21 - n03) * (3 * n21 - n03);
  h[3] = a * a + b * b;
  h[4] = (n30 - 3 * n12) * a * (a * a - 3 * b * b) + (3 * n21 - n03) * b * (3 * a * a - b * b);
  h[5] = (n20 - n02) * (a * a - b * b) + 4 * n11 * a * b;
  h[6] = (3 * n21 - n03) * a * (a * a - 3 * b * b) - (n30 - 3 * n12) * b * (3 * a * a - b * b);
  return h;
}

namespace {

// Centroid-distance signature resampled at equal arc length, |c_k| / |c_0|.
std::array<double, 10> fourier_descriptors(std::span<const Point> contour, double cx, double cy) {
  constexpr int kSamples = 64;
  std::array<double, 10> fd{};
  const std::size_t n = contour.size();
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = contour[i];
    const Point& b = contour[(i + 1) % n];
    cum[i + 1] = cum[i] + std::hypot(b.x - a.x, b.y - a.y);
  }
  const double total = cum[n];
  if (total <= 0) return fd;

  std::array<double, kSamples> r{};
  std::size_t seg = 0;
  for (int s = 0; s < kSamples; ++s) {
    const double t = total * s / kSamples;
    while (seg + 1 < n && cum[seg + 1] <= t) ++seg;
    const Point& a = contour[seg];
    const Point& b = contour[(seg + 1) % n];
    const double len = cum[seg + 1] - cum[seg];
    const double u = len > 0 ? (t - cum[seg]) / len : 0.0;
    const double x = a.x + u * (b.x - a.x), y = a.y + u * (b.y - a.y);
    r[s] = std::hypot(x - cx, y - cy);
  }
  auto coef = [&](int k) {
    std::complex<double> acc = 0;
    for (int s = 0; s < kSamples; ++s) acc += r[s] * std::polar(1.0, -2 * M_PI * k * s / kSamples);
    return std::abs(acc) / kSamples;
  };
  const double c0 = coef(0);
  if (c0 <= 0) return fd;
  for (int k = 1; k <= 10; ++k) fd[k - 1] = coef(k) / c0;
  return fd;
}

}  // namespace

std::array<double, kShapeFeatureCount> shape_features(const CellContour& cell) {
  const double area = static_cast<double>(cell.area());
  if (area <= 0) throw_data("shape_features: zero-area region");
  if (cell.points.empty()) throw_data("shape_features: empty contour");
  const Rect& bb = cell.bbox;

  double sx = 0, sy = 0;
  for (int y = 0; y < bb.height; ++y)
    for (int x = 0; x < bb.width; ++x)
      if (cell.mask.at(x, y)) {
        sx += x + bb.x;
        sy += y + bb.y;
      }
  const double cx = sx / area, cy = sy / area;
  double cxx = 0, cyy = 0, cxy = 0;
  for (int y = 0; y < bb.height; ++y)
    for (int x = 0; x < bb.width; ++x)
      if (cell.mask.at(x, y)) {
        const double dx = x + bb.x - cx, dy = y + bb.y - cy;
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
      }
  cxx /= area;
  cyy /= area;
  cxy /= area;
  const double tr = cxx + cyy, det = cxx * cyy - cxy * cxy;
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
  const double l1 = tr / 2 + disc, l2 = std::max(0.0, tr / 2 - disc);
  const double major = 4 * std::sqrt(l1), minor = 4 * std::sqrt(l2);
  const double eccentricity = major > 0 ? std::clamp(minor / major, 0.0, 1.0) : 1.0;

  const double perimeter = std::max(contour_perimeter(cell.points), 1.0);

  // Hull of boundary pixel centres: convex area (pixel count) and perimeter.
  std::vector<PointF> centres;
  centres.reserve(cell.points.size());
  for (const auto& p : cell.points) centres.push_back({double(p.x), double(p.y)});
  const auto hull = convex_hull(centres);
  double convex_area = area;
  if (hull.size() >= 3) {
    std::vector<Point> ihull;
    for (const auto& p : hull) ihull.push_back({int(std::lround(p.x)), int(std::lround(p.y))});
    convex_area = std::max(area, static_cast<double>(count_foreground(fill_polygon(ihull, bb))));
  }
  const double convex_perimeter = hull.size() >= 2 ? polygon_perimeter(hull) : 0.0;

  // Hull of pixel corners: the region's true extent for Feret and rectangle.
  std::vector<PointF> corners;
  corners.reserve(4 * cell.points.size());
  for (const auto& p : cell.points)
    for (double ox : {-0.5, 0.5})
      for (double oy : {-0.5, 0.5}) corners.push_back({p.x + ox, p.y + oy});
  const auto cal = rotating_calipers(convex_hull(corners));

  double rmax = 0, rmin = std::numeric_limits<double>::infinity(), rsum = 0;
  for (const auto& p : cell.points) {
    const double r = std::hypot(p.x - cx, p.y - cy);
    rmax = std::max(rmax, r);
    rmin = std::min(rmin, r);
    rsum += r;
  }
  const double rmean = rsum / cell.points.size();

  // Mahalanobis radii against the region covariance; 1/12 is the variance
  // of one pixel so single-row regions stay invertible.
  Eigen::Matrix2d cov;
  cov << cxx + 1.0 / 12, cxy, cxy, cyy + 1.0 / 12;
  const Eigen::Matrix2d inv = cov.inverse();
  double dsum = 0, dsq = 0;
  for (const auto& p : cell.points) {
    const Eigen::Vector2d v(p.x - cx, p.y - cy);
    const double d = std::sqrt(std::max(0.0, v.dot(inv * v)));
    dsum += d;
    dsq += d * d;
  }
  const double nb = static_cast<double>(cell.points.size());
  const double dmean = dsum / nb;
  const double dvar = std::max(0.0, dsq / nb - dmean * dmean);
  const double ellipse_variance = dmean > 0 ? std::sqrt(dvar) / dmean : 0.0;

  const auto hu = hu_moments(cell.mask);
  const auto fd = fourier_descriptors(cell.points, cx, cy);

  std::array<double, kShapeFeatureCount> f{};
  std::size_t i = 0;
  f[i++] = area;
  f[i++] = perimeter;
  f[i++] = convex_area;
  f[i++] = convex_perimeter;
  f[i++] = std::min(1.0, 4 * M_PI * area / (perimeter * perimeter));  // circularity
  f[i++] = eccentricity;
  f[i++] = cal.rect_length / cal.rect_width;                           // aspect ratio
  f[i++] = 1.0 - cal.rect_width / cal.rect_length;                     // elongation
  f[i++] = major > 0 ? 4 * area / (M_PI * major * major) : 1.0;        // roundness
  f[i++] = std::sqrt(4 * area / M_PI) / cal.max_width;                 // compactness
  f[i++] = area / convex_area;                                         // solidity
  f[i++] = area / (static_cast<double>(bb.width) * bb.height);         // extent
  f[i++] = 2 * std::sqrt(area / M_PI);                                 // equivalent diameter
  f[i++] = major;
  f[i++] = minor;
  f[i++] = cal.min_width;
  f[i++] = cal.max_width;
  f[i++] = rmax;
  f[i++] = rmin;
  f[i++] = rmean;
  f[i++] = rmax > 0 ? rmin / rmax : 1.0;                               // R factor
  f[i++] = perimeter * perimeter / area;                               // shape
  f[i++] = ellipse_variance;
  f[i++] = convex_perimeter > 0 ? std::min(1.0, convex_perimeter / perimeter) : 1.0;  // convexity
  for (double h : hu) f[i++] = h;
  for (double d : fd) f[i++] = d;
  return f;
}

}  // namespace rbc
