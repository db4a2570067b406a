#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbc/json.hpp"

namespace rbc {

enum class Activation { identity, relu, tanh, logistic };
Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

struct MlpOptions {
  std::vector<int> hidden{100};
  Activation activation = Activation::relu;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int epochs = 500;
  int batch_size = 32;
  double alpha = 1e-4;  // L2 penalty
  double tol = 1e-4;    // minimum loss improvement that resets patience
  int patience = 10;    // epochs without improvement before stopping
};

/// Fully connected network with a softmax output layer.
struct Mlp {
  Activation activation = Activation::relu;
  std::vector<Eigen::MatrixXd> W;  // layer l maps width(l) -> width(l+1)
  std::vector<Eigen::VectorXd> b;
  std::vector<double> loss_curve;  // mean training loss per epoch

  int n_outputs() const { return static_cast<int>(b.back().size()); }
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const;

  /// Mean cross-entropy plus alpha/(2n) * sum of squared weights on (X, y),
  /// with gradients in the same layout as W and b.
  double loss_and_gradient(const Eigen::MatrixXd& X, std::span<const int> y, double alpha,
                           std::vector<Eigen::MatrixXd>& gW, std::vector<Eigen::VectorXd>& gb) const;

  Json to_json() const;
  static Mlp from_json(const Json& j);
};

/// Glorot-uniform initialisation as used for the given activation.
Mlp init_mlp(int n_inputs, int n_outputs, const MlpOptions& opt, std::uint64_t seed);

/// Minibatch SGD with classical momentum; batches reshuffled every epoch.
Mlp train_mlp(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes, const MlpOptions& opt,
              std::uint64_t seed);

}  // namespace rbc
