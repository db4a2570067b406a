#include <algorithm>

#include "rbc/imaging.hpp"

namespace rbc {

namespace {

GrayImage to_levels(const BinaryImage& m) {
  GrayImage g(m.width(), m.height());
  auto src = m.pixels();
  auto dst = g.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255 : 0;
  return g;
}

}  // namespace

SegmentResult segment_image(const RgbImage& img, const SegmentParams& p) {
  if (p.open_radius < 1) throw_parameter("open_radius must be >= 1");
  SegmentResult res;
  const auto otsu = otsu_threshold(to_gray(img), p.invert);
  res.threshold = otsu.threshold;
  if (otsu.degenerate) {
    res.diagnostics.push_back("constant image: no foreground");
    return res;
  }

  // Denoise the binary mask, then re-binarise halfway.
  const auto smooth = gaussian_smooth(to_levels(otsu.mask), p.sigma);
  BinaryImage denoised(img.width(), img.height(), 0);
  {
    auto s = smooth.pixels();
    auto d = denoised.pixels();
    for (std::size_t i = 0; i < s.size(); ++i) d[i] = s[i] >= 128;
  }
  const auto opened = morphological_open(denoised, p.open_radius);
  const auto edges = canny_edges(to_levels(opened), p.canny_low, p.canny_high);

  // Edges close outlines; edge pixels outside the mask are not cell area.
  BinaryImage closed(img.width(), img.height(), 0);
  {
    auto o = opened.pixels();
    auto e = edges.pixels();
    auto r = closed.pixels();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = o[i] | e[i];
  }
  BinaryImage region = fill_holes(closed);
  {
    auto o = opened.pixels();
    auto e = edges.pixels();
    auto r = region.pixels();
    for (std::size_t i = 0; i < r.size(); ++i)
      if (e[i] && !o[i]) r[i] = 0;
  }
  auto contours = extract_contours(region, p.min_area, img);
  if (!p.split_clusters || contours.empty()) {
    res.cells = std::move(contours);
    return res;
  }

  SplitParams sp = p.split;
  if (sp.reference_area <= 0) {
    std::vector<std::size_t> areas;
    for (const auto& c : contours) areas.push_back(c.area());
    std::nth_element(areas.begin(), areas.begin() + areas.size() / 2, areas.end());
    sp.reference_area = static_cast<double>(areas[areas.size() / 2]);
  }
  sp.min_area = std::max(sp.min_area, p.min_area);
  for (const auto& c : contours) {
    auto split = split_overlapping(c, sp);
    for (auto& d : split.diagnostics) res.diagnostics.push_back(std::move(d));
    for (auto& cell : split.cells) res.cells.push_back(std::move(cell));
  }
  return res;
}

}  // namespace rbc
