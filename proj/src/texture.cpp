#include <algorithm>
#include <cmath>

#include "rbc/features.hpp"

namespace rbc {

GrayImage quantize_gray(const GrayImage& img, int levels) {
  if (levels < 2 || levels > 256) throw_parameter("quantize_gray: levels must be in 2..256");
  GrayImage out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<std::uint8_t>(src[i] * levels / 256);
  return out;
}

Point glcm_offset(int distance, int angle_index) {
  switch (angle_index) {
    case 0: return {distance, 0};
    case 1: return {distance, -distance};
    case 2: return {0, -distance};
    case 3: return {-distance, -distance};
    default: throw_parameter("glcm angle index must be 0..3");
  }
}

Glcm glcm(const GrayImage& quantized, const BinaryImage& mask, int distance, int angle_index, int levels) {
  if (distance < 1) throw_parameter("glcm distance must be >= 1");
  if (levels < 2 || levels > 256) throw_parameter("glcm levels must be in 2..256");
  if (quantized.width() != mask.width() || quantized.height() != mask.height())
    throw_parameter("glcm: image and mask sizes differ");
  const Point off = glcm_offset(distance, angle_index);
  Glcm g;
  g.levels = levels;
  g.distance = distance;
  g.angle_index = angle_index;
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(levels) * levels, 0);
  std::uint64_t pairs = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      const int xx = x + off.x, yy = y + off.y;
      if (!mask.at(x, y) || !mask.contains(xx, yy) || !mask.at(xx, yy)) continue;
      const int i = quantized.at(x, y), j = quantized.at(xx, yy);
      if (i >= levels || j >= levels) throw_parameter("glcm: grey value exceeds level count");
      ++counts[static_cast<std::size_t>(i) * levels + j];
      ++counts[static_cast<std::size_t>(j) * levels + i];
      pairs += 2;
    }
  if (pairs == 0) throw_data("glcm: no pixel pairs inside the mask");
  g.p.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) g.p[k] = static_cast<double>(counts[k]) / pairs;
  return g;
}

GlcmFeatures glcm_features(const Glcm& g) {
  const int n = g.levels;
  double mu_i = 0, mu_j = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      mu_i += i * g.at(i, j);
      mu_j += j * g.at(i, j);
    }
  double var_i = 0, var_j = 0;
  GlcmFeatures f;
  double asm_ = 0, cov = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double p = g.at(i, j);
      const double d = i - j;
      f.contrast += p * d * d;
      f.dissimilarity += p * std::abs(d);
      f.homogeneity += p / (1 + d * d);
      asm_ += p * p;
      var_i += p * (i - mu_i) * (i - mu_i);
      var_j += p * (j - mu_j) * (j - mu_j);
      cov += p * (i - mu_i) * (j - mu_j);
    }
  f.energy = std::sqrt(asm_);
  const double denom = std::sqrt(var_i * var_j);
  f.correlation = denom > 1e-15 ? std::clamp(cov / denom, -1.0, 1.0) : 1.0;
  return f;
}

HistogramFeatures histogram_features(std::span<const double> values) {
  HistogramFeatures h;
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) return h;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 <= 0) return h;
  h.skewness = m3 / std::pow(m2, 1.5);
  h.kurtosis = m4 / (m2 * m2) - 3.0;
  return h;
}

std::array<double, kTextureFeatureCount> texture_features(const GrayImage& gray, const BinaryImage& mask,
                                                          int levels) {
  std::vector<double> values;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) values.push_back(gray.at(x, y));
  if (values.empty()) throw_data("texture_features: empty region");

  std::array<double, kTextureFeatureCount> out{};
  const auto h = histogram_features(values);
  out[0] = h.skewness;
  out[1] = h.kurtosis;

  const auto q = quantize_gray(gray, levels);
  constexpr int kConfigs = kGlcmDistances * kGlcmAngles;
  for (int d = 1; d <= kGlcmDistances; ++d)
    for (int a = 0; a < kGlcmAngles; ++a) {
      const int k = (d - 1) * kGlcmAngles + a;
      const auto f = glcm_features(glcm(q, mask, d, a, levels));
      out[2 + 0 * kConfigs + k] = f.contrast;
      out[2 + 1 * kConfigs + k] = f.dissimilarity;
      out[2 + 2 * kConfigs + k] = f.homogeneity;
      out[2 + 3 * kConfigs + k] = f.energy;
      out[2 + 4 * kConfigs + k] = f.correlation;
    }
  return out;
}

}  // namespace rbc
