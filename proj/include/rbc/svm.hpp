#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rbc/json.hpp"

namespace rbc {

inline double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b,
                         double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

struct SmoOptions {
  double C = 1;
  double gamma = 1;
  double tol = 1e-3;
  std::int64_t max_iter = 0;  // 0: 10^4 passes over the data
};

/// Two-class soft-margin SVM. Labels are +1 / -1.
struct BinarySvm {
  Eigen::MatrixXd sv;      // support vectors, one per row
  Eigen::VectorXd coef;    // alpha_i * y_i
  double rho = 0;
  double gamma = 1;

  // Training diagnostics.
  std::vector<double> alpha;  // one per training row, zero off the support set
  double kkt_gap = 0;         // max violating pair gap at exit
  std::int64_t iterations = 0;
  bool converged = false;

  double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Json to_json() const;
  static BinarySvm from_json(const Json& j);
};

/// SMO with second-order working set selection; stops once the maximal
/// violating pair gap drops below tol.
BinarySvm train_binary_svm(const Eigen::MatrixXd& X, std::span<const int> y_pm, const SmoOptions& opt);

/// Gradient-based KKT check, recomputed from scratch: the largest violation
/// of the optimality conditions for the returned alphas and bias.
double kkt_violation(const Eigen::MatrixXd& X, std::span<const int> y_pm, const BinarySvm& m, double C);

/// One-vs-one multiclass wrapper. Vote ties go to the class with the larger
/// summed margin, then to the lower index.
struct SvmModel {
  int n_classes = 0;
  double gamma = 1;
  std::vector<std::pair<int, int>> pairs;
  std::vector<BinarySvm> machines;

  int predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Json to_json() const;
  static SvmModel from_json(const Json& j);
};

SvmModel train_svm(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes, const SmoOptions& opt);

}  // namespace rbc
