#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rbc/imaging.hpp"

using namespace rbc;

namespace {

void paint_disc(BinaryImage& m, double cx, double cy, double r) {
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.at(x, y) = 1;
}

// 8-connected component sizes by recursive-style stack flood, scan order.
std::vector<std::size_t> flood_sizes(const BinaryImage& m) {
  BinaryImage seen(m.width(), m.height(), 0);
  std::vector<std::size_t> sizes;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y) || seen.at(x, y)) continue;
      std::size_t n = 0;
      std::vector<Point> st{{x, y}};
      seen.at(x, y) = 1;
      while (!st.empty()) {
        const Point p = st.back();
        st.pop_back();
        ++n;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = p.x + dx, yy = p.y + dy;
            if (m.contains(xx, yy) && m.at(xx, yy) && !seen.at(xx, yy)) {
              seen.at(xx, yy) = 1;
              st.push_back({xx, yy});
            }
          }
      }
      sizes.push_back(n);
    }
  return sizes;
}

BinaryImage shift_into(const BinaryImage& local, const Rect& bb, int w, int h) {
  BinaryImage out(w, h, 0);
  for (int y = 0; y < bb.height; ++y)
    for (int x = 0; x < bb.width; ++x) out.at(bb.x + x, bb.y + y) = local.at(x, y);
  return out;
}

}  // namespace

TEST_CASE("extract_contours on empty and square masks") {
  CHECK(extract_contours(BinaryImage(8, 8, 0), 1).empty());

  BinaryImage m(20, 20, 0);
  for (int y = 5; y < 15; ++y)
    for (int x = 3; x < 13; ++x) m.at(x, y) = 1;
  const auto cs = extract_contours(m, 1);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].area() == 100);
  CHECK(cs[0].bbox == Rect{3, 5, 10, 10});
  CHECK(cs[0].points.front() == Point{3, 5});
  CHECK(cs[0].points.size() == 36);
  CHECK_FALSE(cs[0].touches_border);
  CHECK(fill_polygon(cs[0].points, cs[0].bbox) == cs[0].mask);
  CHECK(extract_contours(m, 101).empty());
}

TEST_CASE("two disjoint discs match the flood-fill oracle") {
  BinaryImage m(80, 50, 0);
  paint_disc(m, 20, 25, 12);
  paint_disc(m, 58, 20, 9.5);
  const auto sizes = flood_sizes(m);
  const auto cs = extract_contours(m, 10);
  REQUIRE(cs.size() == 2);
  REQUIRE(sizes.size() == 2);
  // Scan order: the second disc reaches higher rows first.
  CHECK(cs[0].bbox.x > 40);
  CHECK(cs[0].area() == sizes[0]);
  CHECK(cs[1].area() == sizes[1]);
}

TEST_CASE("holes are filled and border components flagged") {
  BinaryImage m(30, 30, 0);
  paint_disc(m, 15, 15, 10);
  for (int y = 13; y <= 17; ++y)
    for (int x = 13; x <= 17; ++x) m.at(x, y) = 0;
  paint_disc(m, 0, 0, 5);
  const auto cs = extract_contours(m, 5);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].touches_border);
  CHECK_FALSE(cs[1].touches_border);
  CHECK(cs[1].area() == flood_sizes(fill_holes(m)).back());
}

TEST_CASE("mask area equals polygon enclosed pixel count") {
  std::mt19937 rng(23);
  std::bernoulli_distribution b(0.55);
  std::size_t checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    BinaryImage m(12, 10, 0);
    for (auto& v : m.pixels()) v = b(rng);
    for (const auto& c : extract_contours(m, 1)) {
      CHECK(c.points.size() >= 8);
      const auto poly = fill_polygon(c.points, c.bbox);
      CHECK(count_foreground(poly) == c.area());
      CHECK(poly == c.mask);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("trace handles thin shapes and cut vertices") {
  BinaryImage line(10, 3, 0);
  for (int x = 2; x < 7; ++x) line.at(x, 1) = 1;
  const auto pts = trace_boundary(line, {2, 1});
  CHECK(pts.size() == 8);
  CHECK(fill_polygon(pts, {0, 0, 10, 3}) == line);

  // Two blobs joined through a single top pixel: the start is visited twice.
  BinaryImage v(11, 8, 0);
  v.at(5, 0) = 1;
  for (int y = 1; y < 8; ++y)
    for (int x = 0; x < 11; ++x)
      if ((x <= 4 && x >= 4 - y) || (x >= 6 && x <= 6 + y)) v.at(x, y) = 1;
  const auto cs = extract_contours(v, 1);
  REQUIRE(cs.size() == 1);
  const auto filled = shift_into(fill_polygon(cs[0].points, cs[0].bbox), cs[0].bbox, 11, 8);
  CHECK(filled == fill_holes(v));
}

TEST_CASE("single disc is not split") {
  BinaryImage m(60, 60, 0);
  paint_disc(m, 30, 30, 20);
  const auto cs = extract_contours(m, 1);
  REQUIRE(cs.size() == 1);
  CHECK(notable_points(cs[0].points, 7, 200).empty());
  CHECK(contour_solidity(cs[0]) == doctest::Approx(1.0));
  SplitParams p;
  p.reference_area = static_cast<double>(cs[0].area());
  const auto out = split_overlapping(cs[0], p);
  REQUIRE(out.cells.size() == 1);
  CHECK(out.cells[0].points == cs[0].points);
  CHECK_FALSE(out.cells[0].is_split_from_cluster);
}

TEST_CASE("two overlapping discs split near their centres") {
  for (double r : {20.0, 30.0}) {
    const double d = 1.2 * r;
    const int w = static_cast<int>(2 * r + d + 20), h = static_cast<int>(2 * r + 20);
    const double c1x = 10 + r, c2x = 10 + r + d, cy = 10 + r;
    BinaryImage m(w, h, 0);
    paint_disc(m, c1x, cy, r);
    paint_disc(m, c2x, cy, r);
    const auto cs = extract_contours(m, 1);
    REQUIRE(cs.size() == 1);
    SplitParams p;
    p.reference_area = M_PI * r * r;
    CHECK(is_cluster(cs[0], p));
    const auto out = split_overlapping(cs[0], p);
    REQUIRE(out.cells.size() == 2);
    std::size_t total = 0;
    for (const auto& c : out.cells) {
      CHECK(c.is_split_from_cluster);
      total += c.area();
      // Mask centroid as the fragment centre.
      double sx = 0, sy = 0, n = 0;
      for (int y = 0; y < c.bbox.height; ++y)
        for (int x = 0; x < c.bbox.width; ++x)
          if (c.mask.at(x, y)) {
            sx += x + c.bbox.x;
            sy += y + c.bbox.y;
            ++n;
          }
      const double mx = sx / n, my = sy / n;
      const double err = std::min(std::hypot(mx - c1x, my - cy), std::hypot(mx - c2x, my - cy));
      CHECK(err <= 0.15 * r);
    }
    CHECK(total <= 1.2 * cs[0].area());
  }
}

TEST_CASE("three-lobed cluster yields several smaller pieces") {
  BinaryImage m(120, 120, 0);
  const double r = 22;
  for (int k = 0; k < 3; ++k) {
    const double a = 2 * M_PI * k / 3 - M_PI / 2;
    paint_disc(m, 60 + 0.7 * r * 1.15 * std::cos(a), 60 + 0.7 * r * 1.15 * std::sin(a), r);
  }
  const auto cs = extract_contours(m, 1);
  REQUIRE(cs.size() == 1);
  SplitParams p;
  p.reference_area = M_PI * r * r;
  const auto out = split_overlapping(cs[0], p);
  CHECK(out.cells.size() >= 2);
  std::size_t total = 0;
  for (const auto& c : out.cells) {
    CHECK(c.area() <= cs[0].area());
    total += c.area();
  }
  CHECK(total <= 1.2 * cs[0].area());
}

TEST_CASE("collinear arcs produce no ellipse") {
  std::vector<PointF> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), 2.0 * i});
  CHECK_FALSE(fit_ellipse(line).has_value());
  std::vector<PointF> circ;
  for (int i = 0; i < 40; ++i) circ.push_back({5 + 3 * std::cos(i * 0.1), -2 + 3 * std::sin(i * 0.1)});
  const auto e = fit_ellipse(circ);
  REQUIRE(e.has_value());
  CHECK(e->cx == doctest::Approx(5).epsilon(1e-6));
  CHECK(e->cy == doctest::Approx(-2).epsilon(1e-6));
  CHECK(e->semi_major == doctest::Approx(3).epsilon(1e-6));
}

TEST_CASE("segmentation finds dark discs and is deterministic") {
  RgbImage img(160, 100, Rgb{230, 220, 225});
  auto disc = [&](double cx, double cy, double r) {
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.at(x, y) = Rgb{150, 60, 90};
  };
  disc(40, 50, 18);
  disc(110, 45, 20);
  SegmentParams p;
  const auto a = segment_image(img, p);
  const auto b = segment_image(img, p);
  REQUIRE(a.cells.size() == 2);
  REQUIRE(b.cells.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.cells[i].points == b.cells[i].points);
    CHECK(a.cells[i].mask == b.cells[i].mask);
    CHECK(a.cells[i].roi.width() == a.cells[i].bbox.width);
  }
  // Scan order puts the higher disc (radius 20) first.
  CHECK(std::abs(double(a.cells[0].area()) - M_PI * 20 * 20) < 0.05 * M_PI * 20 * 20);
  CHECK(std::abs(double(a.cells[1].area()) - M_PI * 18 * 18) < 0.05 * M_PI * 18 * 18);

  const auto flat = segment_image(RgbImage(20, 20, Rgb{9, 9, 9}), p);
  CHECK(flat.cells.empty());
  CHECK_FALSE(flat.diagnostics.empty());
}
