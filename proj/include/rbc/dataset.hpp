#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbc/json.hpp"

namespace rbc {

/// Canonical label order. Class index i in every matrix and report refers to
/// the i-th entry of Dataset::classes, which is always a prefix-ordered subset
/// of this list.
inline const std::vector<std::string> kAllClasses = {"c", "e", "o"};
inline constexpr const char* kNormalClass = "c";

struct Dataset {
  Eigen::MatrixXd X;                       // n x d
  std::vector<int> y;                      // index into classes
  std::vector<std::string> classes;        // e.g. {c, e, o}
  std::vector<std::string> feature_names;  // d names
  std::string source;                      // CSV path, empty for in-memory data
  std::vector<std::string> row_ids;        // cell ids, one per row
  std::vector<std::string> images;         // source image per row, may be empty

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
  std::vector<std::size_t> class_counts() const;

  /// Throws Error(data) unless shapes agree, labels are in range and every
  /// value is finite.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset select_columns(std::span<const std::size_t> cols) const;
  Dataset select_features(std::span<const std::string> names) const;
  /// Keeps only rows whose class is listed, re-indexing labels.
  Dataset restrict_classes(std::span<const std::string> keep) const;
};

/// Reads `image,cell_id,label,<features...>` CSV. Rows with an empty label
/// are rejected; labels must be c, e or o. Only classes present appear in
/// Dataset::classes, in canonical order.
Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);

/// Minimal RFC 4180 line splitter (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(const std::string& line);

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

struct ScalerStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;          // N-1 divisor; 1 for constant columns
  std::vector<bool> degenerate;    // column was constant on the fit data
};

ScalerStats standard_scale_fit(const Eigen::MatrixXd& X);
Eigen::MatrixXd standard_scale_apply(const ScalerStats& s, const Eigen::MatrixXd& X);
Eigen::MatrixXd standard_scale_inverse(const ScalerStats& s, const Eigen::MatrixXd& Z);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Stratified split. Test size is ceil((1 - f) n); per-class quotas use
/// largest remainders (ties to the lower class index). Throws if a class has
/// fewer than two members.
Split split_train_test(std::span<const int> labels, double train_fraction, std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> valid;  // ascending
};

/// k folds over n items. With labels, each class is shuffled and dealt
/// round-robin after the previous class so fold sizes and per-class counts
/// differ by at most one.
std::vector<Fold> kfold(std::size_t n, int k, std::uint64_t seed, std::span<const int> stratify = {});

Json split_manifest(const Split& s, double train_fraction, std::uint64_t seed);

}  // namespace rbc
