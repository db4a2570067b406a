#include "rbc/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace rbc {

FeatureCatalog::FeatureCatalog() {
  const char* shape[] = {"Area",
                         "Perimeter",
                         "Convex area",
                         "Convex perimeter",
                         "Circularity",
                         "Eccentricity",
                         "Aspect ratio",
                         "Elongation",
                         "Roundness",
                         "Compactness",
                         "Solidity",
                         "Extent",
                         "Area equivalent diameter",
                         "Major axis",
                         "Minor axis",
                         "Min feret",
                         "Max feret",
                         "Max R",
                         "Min R",
                         "Mean R",
                         "R factor",
                         "Shape",
                         "Ellipse variance",
                         "Convexity"};
  for (const char* n : shape) names_.push_back(n);
  for (int k = 1; k <= 7; ++k) names_.push_back("HU" + std::to_string(k));
  for (int k = 1; k <= 10; ++k) names_.push_back("FD" + std::to_string(k));
  groups_.assign(names_.size(), FeatureGroup::shape);

  for (const char* ch : {"Red", "Green", "Blue", "H", "S", "V", "L", "a", "b"}) {
    names_.push_back(std::string(ch) + " mean");
    names_.push_back(std::string(ch) + " std");
  }
  groups_.resize(names_.size(), FeatureGroup::color);

  names_.push_back("Skewness");
  names_.push_back("Kurtosis");
  for (const char* f : {"Contrast", "Dissimilarity", "Homogeneity", "Energy", "Correlation"})
    for (int k = 1; k <= kGlcmDistances * kGlcmAngles; ++k) names_.push_back(f + std::to_string(k));
  groups_.resize(names_.size(), FeatureGroup::texture);
}

const FeatureCatalog& FeatureCatalog::instance() {
  static const FeatureCatalog catalog;
  return catalog;
}

std::optional<std::size_t> FeatureCatalog::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

const char* to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::shape: return "shape";
    case FeatureGroup::color: return "color";
    case FeatureGroup::texture: return "texture";
  }
  return "?";
}

Hsv rgb_to_hsv(Rgb c) {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0 ? d / mx : 0.0;
  if (d > 0) {
    double h;
    if (mx == r) h = std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = (b - r) / d + 2.0;
    else h = (r - g) / d + 4.0;
    h *= 60.0;
    if (h < 0) h += 360.0;
    out.h = h;
  }
  return out;
}

Lab rgb_to_lab(Rgb c) {
  auto lin = [](std::uint8_t v) {
    const double s = v / 255.0;
    return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
  };
  const double r = lin(c.r), g = lin(c.g), b = lin(c.b);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.0;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  auto f = [](double t) {
    constexpr double e = 6.0 / 29.0;
    return t > e * e * e ? std::cbrt(t) : t / (3 * e * e) + 4.0 / 29.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

std::array<double, kColorFeatureCount> color_features(const RgbImage& roi, const BinaryImage& mask) {
  if (roi.width() != mask.width() || roi.height() != mask.height())
    throw_parameter("color_features: roi and mask sizes differ");
  std::vector<std::array<double, 9>> px;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      const Rgb c = roi.at(x, y);
      const Hsv h = rgb_to_hsv(c);
      const Lab l = rgb_to_lab(c);
      px.push_back({double(c.r), double(c.g), double(c.b), h.h, h.s, h.v, l.l, l.a, l.b});
    }
  if (px.empty()) throw_data("color_features: empty region");
  std::array<double, kColorFeatureCount> out{};
  const double n = static_cast<double>(px.size());
  for (int ch = 0; ch < 9; ++ch) {
    double mean = 0;
    for (const auto& p : px) mean += p[ch];
    mean /= n;
    double ss = 0;
    for (const auto& p : px) ss += (p[ch] - mean) * (p[ch] - mean);
    out[2 * ch] = mean;
    out[2 * ch + 1] = px.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  }
  return out;
}

std::vector<double> extract_all(const CellContour& cell, const FeatureOptions& opt) {
  if (cell.roi.empty()) throw_data("extract_all: cell has no image crop");
  std::vector<double> v;
  v.reserve(kFeatureCount);
  const auto shape = shape_features(cell);
  const auto color = color_features(cell.roi, cell.mask);
  const auto texture = texture_features(to_gray(cell.roi), cell.mask, opt.glcm_levels);
  v.insert(v.end(), shape.begin(), shape.end());
  v.insert(v.end(), color.begin(), color.end());
  v.insert(v.end(), texture.begin(), texture.end());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw_data("extract_all: non-finite " + FeatureCatalog::instance().names()[i]);
  return v;
}

std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string feature_csv_header() {
  std::string h = "image,cell_id,label";
  for (const auto& n : FeatureCatalog::instance().names()) h += "," + csv_field(n);
  return h;
}

std::string feature_csv_line(const FeatureRow& row) {
  std::string s = csv_field(row.image) + "," + csv_field(row.cell_id) + "," + csv_field(row.label);
  for (double v : row.values) s += "," + format_number(v);
  return s;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write " + path.string());
  out << feature_csv_header() << '\n';
  for (const auto& r : rows) {
    if (r.values.size() != kFeatureCount) throw_parameter("feature row must hold 121 values");
    out << feature_csv_line(r) << '\n';
  }
  if (!out) throw_io("write failed for " + path.string());
}

}  // namespace rbc
