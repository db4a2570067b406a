#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rbc/imaging.hpp"

namespace rbc {

double contour_solidity(const CellContour& c) {
  // Pixel centres inside the hull of the boundary pixel centres, so a
  // convex digital shape has solidity exactly 1.
  std::vector<PointF> pts;
  pts.reserve(c.points.size());
  for (const auto& p : c.points) pts.push_back({double(p.x), double(p.y)});
  const auto hull = convex_hull(pts);
  if (hull.size() < 3) return 1.0;
  std::vector<Point> ihull;
  for (const auto& p : hull) ihull.push_back({int(std::lround(p.x)), int(std::lround(p.y))});
  const auto filled = fill_polygon(ihull, c.bbox);
  const double hull_area = static_cast<double>(count_foreground(filled));
  return hull_area > 0 ? std::min(1.0, c.area() / hull_area) : 1.0;
}

std::vector<std::size_t> notable_points(std::span<const Point> contour, int window,
                                        double concavity_deg) {
  const std::size_t n = contour.size();
  const int k = std::max(1, window / 2);
  if (n < static_cast<std::size_t>(2 * k + 3)) return {};

  std::vector<PointF> pf;
  pf.reserve(n);
  for (const auto& p : contour) pf.push_back({double(p.x), double(p.y)});
  const double orient = signed_area(pf) >= 0 ? 1.0 : -1.0;

  std::vector<double> interior(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PointF& a = pf[(i + n - k) % n];
    const PointF& b = pf[i];
    const PointF& c = pf[(i + k) % n];
    const double ux = b.x - a.x, uy = b.y - a.y;
    const double vx = c.x - b.x, vy = c.y - b.y;
    const double turn = std::atan2(ux * vy - uy * vx, ux * vx + uy * vy);
    interior[i] = 180.0 - orient * turn * 180.0 / M_PI;
  }

  std::vector<char> concave(n);
  for (std::size_t i = 0; i < n; ++i) concave[i] = interior[i] > concavity_deg;
  if (std::all_of(concave.begin(), concave.end(), [](char v) { return v; })) return {};

  // Walk runs starting just after a non-concave index so wrap-around runs stay whole.
  std::size_t start = 0;
  while (concave[start]) ++start;
  std::vector<std::size_t> out;
  std::size_t i = 0;
  while (i < n) {
    const std::size_t idx = (start + i) % n;
    if (!concave[idx]) {
      ++i;
      continue;
    }
    std::size_t best = idx;
    while (i < n && concave[(start + i) % n]) {
      const std::size_t j = (start + i) % n;
      if (interior[j] > interior[best]) best = j;
      ++i;
    }
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_cluster(const CellContour& c, const SplitParams& p) {
  const double area = static_cast<double>(c.area());
  if (p.reference_area > 0 && area > p.area_ratio * p.reference_area) return true;
  if (contour_solidity(c) < p.min_solidity) return true;
  return notable_points(c.points, p.window, p.concavity_deg).size() >= 2;
}

namespace {

bool similar(const Ellipse& a, const Ellipse& b) {
  const double tol = 0.25 * std::min(a.semi_minor, b.semi_minor);
  const double dc = std::hypot(a.cx - b.cx, a.cy - b.cy);
  auto rel = [](double u, double v) { return std::abs(u - v) / std::max(u, v); };
  return dc < tol && rel(a.semi_major, b.semi_major) < 0.25 && rel(a.semi_minor, b.semi_minor) < 0.25;
}

}  // namespace

SplitOutcome split_overlapping(const CellContour& contour, const SplitParams& p) {
  SplitOutcome out;
  if (!is_cluster(contour, p)) {
    out.cells.push_back(contour);
    return out;
  }
  const auto notable = notable_points(contour.points, p.window, p.concavity_deg);
  if (notable.size() < 2) {
    out.diagnostics.push_back("cluster kept whole: fewer than two concave points");
    out.cells.push_back(contour);
    return out;
  }

  const std::size_t n = contour.points.size();
  const double diag = std::hypot(contour.bbox.width, contour.bbox.height);
  struct Fit {
    std::vector<PointF> support;
    Ellipse e;
  };
  std::vector<Fit> fits;
  for (std::size_t a = 0; a < notable.size(); ++a) {
    const std::size_t from = notable[a], to = notable[(a + 1) % notable.size()];
    std::vector<PointF> arc;
    for (std::size_t i = from;; i = (i + 1) % n) {
      arc.push_back({double(contour.points[i].x), double(contour.points[i].y)});
      if (i == to) break;
    }
    if (arc.size() < static_cast<std::size_t>(std::max(6, p.window))) {
      out.diagnostics.push_back("arc " + std::to_string(a) + " too short to fit, discarded");
      continue;
    }
    const auto e = fit_ellipse(arc);
    if (!e || e->semi_minor / e->semi_major < p.min_axis_ratio || e->semi_major > diag) {
      out.diagnostics.push_back("arc " + std::to_string(a) + " gave a degenerate ellipse, discarded");
      continue;
    }
    fits.push_back({std::move(arc), *e});
  }

  // Arcs of the same cell interrupted by a spurious concavity fit nearly the same ellipse.
  for (std::size_t i = 0; i < fits.size(); ++i)
    for (std::size_t j = i + 1; j < fits.size();) {
      if (!similar(fits[i].e, fits[j].e)) {
        ++j;
        continue;
      }
      auto merged = fits[i].support;
      merged.insert(merged.end(), fits[j].support.begin(), fits[j].support.end());
      if (auto e = fit_ellipse(merged)) {
        fits[i].support = std::move(merged);
        fits[i].e = *e;
      }
      fits.erase(fits.begin() + static_cast<std::ptrdiff_t>(j));
    }

  if (fits.size() < 2) {
    out.diagnostics.push_back("cluster kept whole: fewer than two usable ellipse fits");
    out.cells.push_back(contour);
    return out;
  }

  const Rect& bb = contour.bbox;
  std::vector<BinaryImage> child(fits.size(), BinaryImage(bb.width, bb.height, 0));
  std::size_t total = 0;
  for (std::size_t f = 0; f < fits.size(); ++f)
    for (int y = 0; y < bb.height; ++y)
      for (int x = 0; x < bb.width; ++x)
        if (contour.mask.at(x, y) && fits[f].e.radial(x + bb.x, y + bb.y) <= 1.0) {
          child[f].at(x, y) = 1;
          ++total;
        }

  if (total > 1.2 * contour.area()) {
    // Contested pixels go to the ellipse they sit deepest inside.
    for (int y = 0; y < bb.height; ++y)
      for (int x = 0; x < bb.width; ++x) {
        std::size_t best = fits.size();
        double best_r = std::numeric_limits<double>::infinity();
        int owners = 0;
        for (std::size_t f = 0; f < fits.size(); ++f) {
          if (!child[f].at(x, y)) continue;
          ++owners;
          const double r = fits[f].e.radial(x + bb.x, y + bb.y);
          if (r < best_r) {
            best_r = r;
            best = f;
          }
        }
        if (owners < 2) continue;
        for (std::size_t f = 0; f < fits.size(); ++f) child[f].at(x, y) = (f == best);
      }
  }

  std::vector<CellContour> cells;
  for (std::size_t f = 0; f < fits.size(); ++f) {
    auto parts = extract_contours(child[f], p.min_area, contour.roi);
    if (parts.empty()) {
      out.diagnostics.push_back("fragment " + std::to_string(f) + " empty after clipping, discarded");
      continue;
    }
    auto largest = std::max_element(parts.begin(), parts.end(), [](const auto& a, const auto& b) {
      return a.area() < b.area();
    });
    CellContour c = std::move(*largest);
    c.bbox.x += bb.x;
    c.bbox.y += bb.y;
    for (auto& q : c.points) q = {q.x + bb.x, q.y + bb.y};
    c.is_split_from_cluster = true;
    c.touches_border = contour.touches_border;
    cells.push_back(std::move(c));
  }
  if (cells.size() < 2) {
    out.diagnostics.push_back("cluster kept whole: fewer than two fragments survived");
    out.cells.push_back(contour);
    return out;
  }
  out.cells = std::move(cells);
  return out;
}

}  // namespace rbc
