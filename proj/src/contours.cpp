#include <algorithm>
#include <array>
#include <deque>

#include "rbc/imaging.hpp"

namespace rbc {

namespace {

// Clockwise in image coordinates (y down), starting east.
constexpr std::array<Point, 8> kDirs{{{1, 0}, {1, 1}, {0, 1}, {-1, 1},
                                      {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

bool fg(const BinaryImage& m, int x, int y) { return m.contains(x, y) && m.at(x, y); }

}  // namespace

std::vector<Point> trace_boundary(const BinaryImage& mask, Point start) {
  if (!fg(mask, start.x, start.y)) throw_parameter("trace_boundary: start pixel is background");
  std::vector<Point> pts{start};
  Point cur = start;
  // Pretend we arrived moving north-east so the first sweep starts due west,
  // which is background for a scanline-first pixel.
  int dir = 7;
  int first_dir = -1;
  // Jacob's criterion: stop on re-entering the start with the initial move.
  const std::size_t cap = 4 * mask.size() + 8;
  while (pts.size() < cap) {
    int next = -1;
    for (int k = 0; k < 8; ++k) {
      const int d = (dir + 5 + k) % 8;
      if (fg(mask, cur.x + kDirs[d].x, cur.y + kDirs[d].y)) {
        next = d;
        break;
      }
    }
    if (next < 0) break;  // isolated pixel
    if (cur == start && first_dir >= 0 && next == first_dir) break;
    if (first_dir < 0) first_dir = next;
    cur = {cur.x + kDirs[next].x, cur.y + kDirs[next].y};
    dir = next;
    pts.push_back(cur);
  }
  if (pts.size() > 1 && pts.back() == start) pts.pop_back();
  return pts;
}

std::vector<CellContour> extract_contours(const BinaryImage& mask, std::size_t min_area,
                                          const RgbImage& source) {
  if (!source.empty() && (source.width() != mask.width() || source.height() != mask.height()))
    throw_parameter("extract_contours: source and mask sizes differ");
  const int w = mask.width(), h = mask.height();
  std::vector<int> label(mask.size(), 0);
  std::vector<CellContour> out;
  int next_label = 0;
  std::vector<Point> comp;
  std::deque<Point> queue;

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!mask.at(x, y) || label[idx]) continue;
      ++next_label;
      comp.clear();
      label[idx] = next_label;
      queue.push_back({x, y});
      int x0 = x, x1 = x, y0 = y, y1 = y;
      while (!queue.empty()) {
        const Point p = queue.front();
        queue.pop_front();
        comp.push_back(p);
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
        for (const auto& d : kDirs) {
          const int xx = p.x + d.x, yy = p.y + d.y;
          if (!fg(mask, xx, yy)) continue;
          int& l = label[static_cast<std::size_t>(yy) * w + xx];
          if (l) continue;
          l = next_label;
          queue.push_back({xx, yy});
        }
      }

      CellContour c;
      c.bbox = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
      BinaryImage local(c.bbox.width, c.bbox.height, 0);
      for (const auto& p : comp) local.at(p.x - x0, p.y - y0) = 1;
      c.mask = fill_holes(local);
      if (c.area() < min_area) continue;

      // The local mask holds only this component, so tracing there cannot
      // wander into a neighbour.
      auto pts = trace_boundary(local, {x - x0, y - y0});
      if (pts.size() < 8) continue;
      for (auto& p : pts) p = {p.x + x0, p.y + y0};
      c.points = std::move(pts);
      c.touches_border = x0 == 0 || y0 == 0 || x1 == w - 1 || y1 == h - 1;
      if (!source.empty()) c.roi = crop(source, c.bbox);
      out.push_back(std::move(c));
    }
  return out;
}

}  // namespace rbc
