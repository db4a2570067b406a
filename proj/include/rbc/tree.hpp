#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rbc/json.hpp"
#include "rbc/random.hpp"

namespace rbc {

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  std::vector<double> value;  // class distribution, or a single regression output
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <class Row>
  const std::vector<double>& leaf_value(const Row& x) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(n)];
      n = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(n)].value;
  }
  int depth() const;
  int leaf_count() const;

  Json to_json() const;
  static Tree from_json(const Json& j);
};

struct TreeParams {
  int max_depth = -1;          // -1: unlimited
  int min_samples_leaf = 1;
  int min_samples_split = 2;
  int max_features = 0;        // features tried per node; 0 or >= d means all
  bool random_thresholds = false;  // extra-trees: one uniform cut per feature
};

/// Classification tree on Gini impurity. `rows` may repeat indices (bootstrap
/// draws). Features are scanned in ascending index and a candidate replaces
/// the incumbent only on a strictly better score, so a tree that considers
/// every feature is independent of the generator. `importance` (length d)
/// accumulates the weighted impurity decrease of every split when given.
Tree build_classification_tree(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes,
                               std::span<const std::size_t> rows, const TreeParams& p, Rng& rng,
                               std::vector<double>* importance = nullptr);

struct BoostTreeParams {
  int max_depth = 6;
  double min_child_weight = 1;  // minimum hessian sum per child
  double lambda = 1;            // L2 penalty on leaf values
  double max_delta_step = 0;    // |leaf| clamp, 0 disables
};

/// Second-order regression tree: leaves hold -G/(H + lambda), clamped by
/// max_delta_step; splits maximise the regularised loss reduction.
/// `importance` accumulates split gains per feature.
Tree build_boost_tree(const Eigen::MatrixXd& X, std::span<const double> grad, std::span<const double> hess,
                      std::span<const std::size_t> rows, const BoostTreeParams& p,
                      std::vector<double>* importance = nullptr);

/// Index of the largest entry, lowest index on ties.
int argmax_lowest(std::span<const double> v);

}  // namespace rbc
