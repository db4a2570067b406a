#include "rbc/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>

namespace rbc {

double between_class_variance(std::span<const std::uint64_t, 256> histogram, int t) {
  std::uint64_t n = 0, n0 = 0;
  double s = 0, s0 = 0;
  for (int v = 0; v < 256; ++v) {
    n += histogram[v];
    s += static_cast<double>(v) * histogram[v];
    if (v <= t) {
      n0 += histogram[v];
      s0 += static_cast<double>(v) * histogram[v];
    }
  }
  const std::uint64_t n1 = n - n0;
  if (n0 == 0 || n1 == 0) return 0.0;
  const double w0 = static_cast<double>(n0) / n, w1 = static_cast<double>(n1) / n;
  const double mu0 = s0 / n0, mu1 = (s - s0) / n1;
  return w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
}

OtsuResult otsu_threshold(const GrayImage& img, bool invert) {
  if (img.empty()) throw_parameter("otsu_threshold: empty image");
  std::array<std::uint64_t, 256> hist{};
  for (auto v : img.pixels()) ++hist[v];

  OtsuResult r;
  int occupied = 0, only = 0;
  for (int v = 0; v < 256; ++v)
    if (hist[v]) {
      ++occupied;
      only = v;
    }
  if (occupied == 1) {
    r.threshold = only;
    r.mask = BinaryImage(img.width(), img.height(), 0);
    r.degenerate = true;
    return r;
  }

  double best = -1.0;
  for (int t = 0; t < 255; ++t) {
    const double var = between_class_variance(hist, t);
    if (var > best) {
      best = var;
      r.threshold = t;
    }
  }

  r.mask = BinaryImage(img.width(), img.height(), 0);
  auto src = img.pixels();
  auto dst = r.mask.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const bool dark = src[i] <= r.threshold;
    dst[i] = (dark != invert) ? 1 : 0;
  }
  return r;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw_parameter("gaussian sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

namespace {

constexpr int kFixedBits = 16;
constexpr std::int64_t kFixedOne = std::int64_t{1} << kFixedBits;

std::vector<std::int64_t> fixed_kernel(double sigma) {
  const auto k = gaussian_kernel(sigma);
  std::vector<std::int64_t> q(k.size());
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    q[i] = std::llround(k[i] * kFixedOne);
    sum += q[i];
  }
  q[k.size() / 2] += kFixedOne - sum;  // exact unit gain
  return q;
}

// Returns the blurred image scaled by 2^32.
std::vector<std::int64_t> blur_fixed(const GrayImage& img, double sigma) {
  const auto k = fixed_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width(), h = img.height();
  std::vector<std::int64_t> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int i = -r; i <= r; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += k[i + r] * img.at(xx, y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  std::vector<std::int64_t> out(tmp.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int j = -r; j <= r; ++j) {
        const int yy = std::clamp(y + j, 0, h - 1);
        acc += k[j + r] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

GrayImage gaussian_smooth(const GrayImage& img, double sigma) {
  const auto fixed = blur_fixed(img, sigma);
  GrayImage out(img.width(), img.height());
  auto dst = out.pixels();
  const std::int64_t half = std::int64_t{1} << (2 * kFixedBits - 1);
  for (std::size_t i = 0; i < fixed.size(); ++i)
    dst[i] = static_cast<std::uint8_t>(std::min<std::int64_t>((fixed[i] + half) >> (2 * kFixedBits), 255));
  return out;
}

std::vector<double> gaussian_smooth_values(const GrayImage& img, double sigma) {
  const auto fixed = blur_fixed(img, sigma);
  std::vector<double> out(fixed.size());
  const double scale = std::ldexp(1.0, -2 * kFixedBits);
  for (std::size_t i = 0; i < fixed.size(); ++i) out[i] = fixed[i] * scale;
  return out;
}

std::vector<Point> disc_element(int radius) {
  if (radius < 1) throw_parameter("structuring element radius must be >= 1");
  std::vector<Point> se;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) se.push_back({dx, dy});
  return se;
}

BinaryImage erode(const BinaryImage& img, int radius) {
  const auto se = disc_element(radius);
  BinaryImage out(img.width(), img.height(), 0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (!img.at(x, y)) continue;
      bool keep = true;
      for (const auto& o : se) {
        const int xx = x + o.x, yy = y + o.y;
        if (img.contains(xx, yy) && !img.at(xx, yy)) {
          keep = false;
          break;
        }
      }
      out.at(x, y) = keep;
    }
  return out;
}

BinaryImage dilate(const BinaryImage& img, int radius) {
  const auto se = disc_element(radius);
  BinaryImage out(img.width(), img.height(), 0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (!img.at(x, y)) continue;
      for (const auto& o : se) {
        const int xx = x + o.x, yy = y + o.y;
        if (img.contains(xx, yy)) out.at(xx, yy) = 1;
      }
    }
  return out;
}

BinaryImage morphological_open(const BinaryImage& img, int radius) {
  return dilate(erode(img, radius), radius);
}

BinaryImage fill_holes(const BinaryImage& img) {
  const int w = img.width(), h = img.height();
  BinaryImage outside(w, h, 0);
  std::deque<Point> queue;
  auto seed = [&](int x, int y) {
    if (!img.at(x, y) && !outside.at(x, y)) {
      outside.at(x, y) = 1;
      queue.push_back({x, y});
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  constexpr std::array<Point, 4> n4{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (const auto& d : n4) {
      const int x = p.x + d.x, y = p.y + d.y;
      if (img.contains(x, y)) seed(x, y);
    }
  }
  BinaryImage out(w, h, 0);
  auto o = outside.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = o[i] ? 0 : 1;
  return out;
}

BinaryImage canny_edges(const GrayImage& img, double low, double high) {
  if (!(low >= 0) || !(low < high)) throw_parameter("canny thresholds require 0 <= low < high");
  const int w = img.width(), h = img.height();
  auto px = [&](int x, int y) {
    return static_cast<int>(img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
  };

  std::vector<int> gx(static_cast<std::size_t>(w) * h), gy(gx.size());
  std::vector<double> mag(gx.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const int sy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = sx;
      gy[i] = sy;
      mag[i] = std::sqrt(static_cast<double>(sx) * sx + static_cast<double>(sy) * sy);
    }
  auto m = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : mag[static_cast<std::size_t>(y) * w + x];
  };

  // 0 = suppressed, 1 = weak, 2 = strong
  std::vector<std::uint8_t> cls(gx.size(), 0);
  const double tan22 = std::tan(M_PI / 8), tan67 = std::tan(3 * M_PI / 8);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double v = mag[i];
      if (v <= low) continue;
      const double ax = std::abs(gx[i]), ay = std::abs(gy[i]);
      double before, after;  // "before" must be strictly exceeded, "after" only matched
      if (ay <= tan22 * ax) {
        before = m(x - 1, y);
        after = m(x + 1, y);
      } else if (ay > tan67 * ax) {
        before = m(x, y - 1);
        after = m(x, y + 1);
      } else if ((gx[i] > 0) == (gy[i] > 0)) {
        before = m(x - 1, y - 1);
        after = m(x + 1, y + 1);
      } else {
        before = m(x + 1, y - 1);
        after = m(x - 1, y + 1);
      }
      if (v > before && v >= after) cls[i] = v > high ? 2 : 1;
    }

  BinaryImage out(w, h, 0);
  std::deque<Point> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (cls[static_cast<std::size_t>(y) * w + x] == 2) {
        out.at(x, y) = 1;
        queue.push_back({x, y});
      }
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = p.x + dx, y = p.y + dy;
        if (!out.contains(x, y) || out.at(x, y)) continue;
        if (cls[static_cast<std::size_t>(y) * w + x] == 1) {
          out.at(x, y) = 1;
          queue.push_back({x, y});
        }
      }
  }
  return out;
}

}  // namespace rbc
