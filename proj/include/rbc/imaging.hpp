#pragma once

#include <string>
#include <vector>

#include "rbc/geometry.hpp"
#include "rbc/image.hpp"

namespace rbc {

// ---------------------------------------------------------------------------
// Pixel kernels
// ---------------------------------------------------------------------------

struct OtsuResult {
  int threshold = 0;
  /// Foreground = pixels at or below the threshold (stained cells are darker
  /// than the background), or above it when inverted.
  BinaryImage mask;
  /// Set for a single-valued histogram: no partition exists, mask is empty.
  bool degenerate = false;
};

/// Otsu's method over the 256-bin histogram. Candidate t splits the pixels
/// into {v <= t} and {v > t}; the between-class variance argmax wins, ties
/// going to the lowest t.
OtsuResult otsu_threshold(const GrayImage& img, bool invert = false);

/// Between-class variance of the split {v <= t} / {v > t}; 0 when a side is empty.
double between_class_variance(std::span<const std::uint64_t, 256> histogram, int t);

/// Normalised 1-D Gaussian taps, radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge replication. Evaluated in exact
/// fixed-point arithmetic so the result is transposition-symmetric and
/// constant images are reproduced bit-for-bit.
GrayImage gaussian_smooth(const GrayImage& img, double sigma);

/// Unrounded blur output (same arithmetic as gaussian_smooth).
std::vector<double> gaussian_smooth_values(const GrayImage& img, double sigma);

/// Digital disc offsets {(dx,dy) : dx^2 + dy^2 <= r^2}.
std::vector<Point> disc_element(int radius);

/// Out-of-image pixels are neutral: they never erode the interior and are
/// never dilated into.
BinaryImage erode(const BinaryImage& img, int radius);
BinaryImage dilate(const BinaryImage& img, int radius);
BinaryImage morphological_open(const BinaryImage& img, int radius);

/// Fills background regions not 4-connected to the image border.
BinaryImage fill_holes(const BinaryImage& img);

/// Canny: 3x3 Sobel, L2 magnitude, 4-sector non-maximum suppression,
/// double threshold and 8-connected hysteresis.
BinaryImage canny_edges(const GrayImage& img, double low, double high);

// ---------------------------------------------------------------------------
// Contours and segmentation
// ---------------------------------------------------------------------------

/// One segmented cell. Points are full-image pixel coordinates tracing the
/// outer boundary (Moore neighbourhood, 8-connected, closed). `mask` and `roi`
/// are local to `bbox`.
struct CellContour {
  std::vector<Point> points;
  BinaryImage mask;
  Rect bbox;
  RgbImage roi;
  bool is_split_from_cluster = false;
  bool touches_border = false;

  std::size_t area() const { return count_foreground(mask); }
};

/// Outer boundary of the component containing `start` (scanline-first pixel
/// of the component) by Moore-neighbour tracing with Jacob's stopping rule.
std::vector<Point> trace_boundary(const BinaryImage& mask, Point start);

/// One contour per 8-connected foreground component with at least `min_area`
/// pixels (holes filled), ordered by scanline first encounter. `source` gives
/// the ROI crops; pass an empty image to skip them.
std::vector<CellContour> extract_contours(const BinaryImage& mask, std::size_t min_area,
                                          const RgbImage& source = {});

struct SplitParams {
  double area_ratio = 1.8;        // cluster if area > ratio * reference_area
  double min_solidity = 0.85;     // or if solidity below this
  double reference_area = 0.0;    // median single-cell area; 0 disables the area test
  double concavity_deg = 200.0;   // interior angle marking a notable point
  int window = 7;                 // points spanned by the angle estimate
  double min_axis_ratio = 0.15;   // reject fragment fits flatter than this
  std::size_t min_area = 1;
};

struct SplitOutcome {
  std::vector<CellContour> cells;
  std::vector<std::string> diagnostics;
};

double contour_solidity(const CellContour& c);
bool is_cluster(const CellContour& c, const SplitParams& p);

/// Contour indices whose interior angle over the window exceeds the
/// concavity threshold, reduced to one index per concave run.
std::vector<std::size_t> notable_points(std::span<const Point> contour, int window,
                                        double concavity_deg);

/// Splits an overlapping-cell cluster at its notable points; each arc is
/// completed by an ellipse fit and clipped to the parent region. Non-clusters
/// come back unchanged as a single element.
SplitOutcome split_overlapping(const CellContour& contour, const SplitParams& p);

struct SegmentParams {
  double sigma = 1.0;
  int open_radius = 2;
  double canny_low = 50.0;
  double canny_high = 150.0;
  std::size_t min_area = 200;
  bool invert = false;
  bool split_clusters = true;
  SplitParams split;
};

struct SegmentResult {
  std::vector<CellContour> cells;
  int threshold = 0;
  std::vector<std::string> diagnostics;
};

/// Otsu binarisation, Gaussian denoise, opening, Canny edges, contour
/// extraction and cluster splitting.
SegmentResult segment_image(const RgbImage& img, const SegmentParams& p);

}  // namespace rbc
