#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rbc/dataset.hpp"
#include "rbc/json.hpp"
#include "rbc/models.hpp"
#include "rbc/search.hpp"

namespace rbc {

/// Features in descending importance; equal scores keep column order.
struct ImportanceRanking {
  std::vector<std::pair<std::string, double>> entries;

  std::vector<std::string> names(std::size_t top = SIZE_MAX) const;
  Json to_json() const;
  static ImportanceRanking from_json(const Json& j);
};

/// Mean decrease in Gini impurity over the forest (CART and extra trees are
/// accepted too). Throws Error(parameter) for other families.
ImportanceRanking rf_importance(const TrainedModel& m);
/// Total split gain over every boosted tree and class.
ImportanceRanking gb_importance(const TrainedModel& m);

/// Prefix sizes evaluated by the wrapper: every size up to 30, then steps of
/// five, always ending at d.
std::vector<std::size_t> wrapper_sizes(std::size_t d);

struct WrapperResult {
  std::vector<std::size_t> sizes;
  std::vector<double> scores;      // best CV score per size
  std::vector<ModelSpec> specs;    // grid winner per size
  std::size_t best_size = 0;
  double best_score = 0;
  ModelSpec best_spec;
  std::vector<std::string> best_features;

  Json to_json() const;
  /// "size,score" rows for plotting.
  std::string curve_csv() const;
};

/// For each prefix of `ranking`, grid-searches `space` around `base` on the
/// prefix columns of `train`. The highest score wins, ties to the smaller
/// prefix. `sizes` defaults to wrapper_sizes(ranking size).
WrapperResult wrapper_incremental(const ParamSpace& space, const ModelSpec& base, const ImportanceRanking& ranking,
                                  const Dataset& train, const SearchOptions& opt,
                                  std::vector<std::size_t> sizes = {});

struct Projection {
  std::string kind;                // "pca" or "lda"
  Eigen::VectorXd mean;            // d
  Eigen::MatrixXd components;      // d x m, one component per column
  std::vector<double> ratios;      // explained-variance (pca) or discriminant share (lda)
  std::vector<std::string> warnings;

  Eigen::MatrixXd project(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& Z) const;
  Projection truncated(std::size_t m) const;
  /// Smallest m whose cumulative ratio exceeds `fraction`.
  std::size_t components_for(double fraction) const;
  /// Dataset of projected rows with columns named PC1.. or LD1..
  Dataset apply(const Dataset& ds) const;
  Json to_json() const;
};

/// Principal components of the centred rows, ordered by descending variance.
/// Each component's largest-magnitude entry is positive. Throws Error(data)
/// when n < 2 or every column is constant.
Projection pca_fit(const Eigen::MatrixXd& X);

/// Fisher discriminant directions (at most classes - 1) from the generalised
/// problem Sb v = lambda Sw v. A singular Sw gets a 1e-6 ridge (relative to
/// its mean diagonal) and a warning.
Projection lda_fit(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes);

}  // namespace rbc
