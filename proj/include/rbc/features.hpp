#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbc/image.hpp"
#include "rbc/imaging.hpp"

namespace rbc {

inline constexpr std::size_t kShapeFeatureCount = 41;
inline constexpr std::size_t kColorFeatureCount = 18;
inline constexpr std::size_t kTextureFeatureCount = 62;
inline constexpr std::size_t kFeatureCount = 121;

/// Bumped whenever a name, its position or its formula changes.
inline constexpr std::string_view kCatalogVersion = "rbc-features/1";

enum class FeatureGroup { shape, color, texture };

/// The fixed 121-column contract: 41 shape, 18 color, 62 texture names.
class FeatureCatalog {
public:
  static const FeatureCatalog& instance();

  const std::vector<std::string>& names() const noexcept { return names_; }
  FeatureGroup group(std::size_t index) const { return groups_.at(index); }
  std::optional<std::size_t> index_of(std::string_view name) const;

private:
  FeatureCatalog();
  std::vector<std::string> names_;
  std::vector<FeatureGroup> groups_;
};

const char* to_string(FeatureGroup g);

// ---------------------------------------------------------------------------
// Shape
// ---------------------------------------------------------------------------

/// Boundary length by the Vossepoel-Smeulders chain-code estimator.
double contour_perimeter(std::span<const Point> contour);

/// Seven Hu invariants of the foreground pixels of `mask`.
std::array<double, 7> hu_moments(const BinaryImage& mask);

std::array<double, kShapeFeatureCount> shape_features(const CellContour& cell);

// ---------------------------------------------------------------------------
// Color
// ---------------------------------------------------------------------------

struct Hsv {
  double h = 0, s = 0, v = 0;  // h in degrees [0, 360), s and v in [0, 1]
};
struct Lab {
  double l = 0, a = 0, b = 0;
};

Hsv rgb_to_hsv(Rgb c);
/// sRGB transfer function, D65 white point.
Lab rgb_to_lab(Rgb c);

/// Masked mean and sample standard deviation (N-1) of R,G,B,H,S,V,L*,a*,b*,
/// interleaved as mean, std per channel. A single pixel has std 0.
std::array<double, kColorFeatureCount> color_features(const RgbImage& roi, const BinaryImage& mask);

// ---------------------------------------------------------------------------
// Texture
// ---------------------------------------------------------------------------

/// Uniform binning of 0..255 into `levels` tones: v * levels / 256.
GrayImage quantize_gray(const GrayImage& img, int levels);

inline constexpr int kGlcmAngles = 4;     // 0, pi/4, pi/2, 3pi/4
inline constexpr int kGlcmDistances = 3;  // 1, 2, 3

struct Glcm {
  int levels = 0;
  int distance = 0;
  int angle_index = 0;
  std::vector<double> p;  // row-major levels x levels, sums to 1

  double at(int i, int j) const { return p[static_cast<std::size_t>(i) * levels + j]; }
};

/// Pixel offset (dx, dy) of an angle index at a distance, image rows pointing down.
Point glcm_offset(int distance, int angle_index);

/// Symmetric, normalised co-occurrence matrix of an already quantised image.
/// Pairs with either pixel outside the mask are skipped; throws Error(data)
/// when no pair remains.
Glcm glcm(const GrayImage& quantized, const BinaryImage& mask, int distance, int angle_index, int levels);

struct GlcmFeatures {
  double contrast = 0, dissimilarity = 0, homogeneity = 0, energy = 0, correlation = 0;
};
/// Correlation is 1 when either marginal has zero variance.
GlcmFeatures glcm_features(const Glcm& g);

struct HistogramFeatures {
  double skewness = 0, kurtosis = 0;  // kurtosis is excess (normal = 0)
};
/// Population moments; both are 0 when the values are constant.
HistogramFeatures histogram_features(std::span<const double> values);

std::array<double, kTextureFeatureCount> texture_features(const GrayImage& gray, const BinaryImage& mask,
                                                          int levels = 8);

// ---------------------------------------------------------------------------
// Whole vector and CSV
// ---------------------------------------------------------------------------

struct FeatureOptions {
  int glcm_levels = 8;
};

/// 121 finite values in catalog order. Throws Error(data) if any group fails.
std::vector<double> extract_all(const CellContour& cell, const FeatureOptions& opt = {});

struct FeatureRow {
  std::string image;
  std::string cell_id;
  std::string label;  // c, e, o or empty when unlabelled
  std::vector<double> values;
};

/// Shortest round-trip decimal form.
std::string format_number(double v);

std::string feature_csv_header();
std::string feature_csv_line(const FeatureRow& row);
void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows);

}  // namespace rbc
