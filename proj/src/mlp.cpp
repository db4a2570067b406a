#include "rbc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rbc/error.hpp"
#include "rbc/random.hpp"

namespace rbc {

Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "logistic") return Activation::logistic;
  throw_parameter("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::logistic: return "logistic";
  }
  return "?";
}

namespace {

void activate(Activation a, Eigen::MatrixXd& Z) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: Z = Z.cwiseMax(0.0); break;
    case Activation::tanh: Z = Z.array().tanh().matrix(); break;
    case Activation::logistic: Z = (1.0 / (1.0 + (-Z.array()).exp())).matrix(); break;
  }
}

// Derivative expressed through the activation output A.
void multiply_derivative(Activation a, const Eigen::MatrixXd& A, Eigen::MatrixXd& delta) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: delta = (A.array() > 0).select(delta, 0.0); break;
    case Activation::tanh: delta.array() *= 1.0 - A.array().square(); break;
    case Activation::logistic: delta.array() *= A.array() * (1.0 - A.array()); break;
  }
}

void softmax_rows(Eigen::MatrixXd& Z) {
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    const double m = Z.row(i).maxCoeff();
    Z.row(i) = (Z.row(i).array() - m).exp().matrix();
    Z.row(i) /= Z.row(i).sum();
  }
}

// Activations of every layer; the last holds softmax probabilities.
std::vector<Eigen::MatrixXd> forward(const Mlp& m, const Eigen::MatrixXd& X) {
  std::vector<Eigen::MatrixXd> A{X};
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    Eigen::MatrixXd Z = A.back() * m.W[l];
    Z.rowwise() += m.b[l].transpose();
    if (l + 1 < m.W.size()) activate(m.activation, Z);
    else softmax_rows(Z);
    A.push_back(std::move(Z));
  }
  return A;
}

}  // namespace

Eigen::MatrixXd Mlp::predict_proba(const Eigen::MatrixXd& X) const { return forward(*this, X).back(); }

double Mlp::loss_and_gradient(const Eigen::MatrixXd& X, std::span<const int> y, double alpha,
                              std::vector<Eigen::MatrixXd>& gW, std::vector<Eigen::VectorXd>& gb) const {
  const auto n = static_cast<double>(X.rows());
  const auto A = forward(*this, X);
  const auto& P = A.back();
  double loss = 0;
  Eigen::MatrixXd delta = P;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto c = static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]);
    loss -= std::log(std::max(P(i, c), 1e-300));
    delta(i, c) -= 1.0;
  }
  loss /= n;
  double sq = 0;
  for (const auto& w : W) sq += w.squaredNorm();
  loss += alpha / (2 * n) * sq;

  delta /= n;
  gW.resize(W.size());
  gb.resize(b.size());
  for (std::size_t l = W.size(); l-- > 0;) {
    gW[l] = A[l].transpose() * delta + (alpha / n) * W[l];
    gb[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd prev = delta * W[l].transpose();
      multiply_derivative(activation, A[l], prev);
      delta = std::move(prev);
    }
  }
  return loss;
}

Json Mlp::to_json() const {
  Json layers = Json::array();
  for (std::size_t l = 0; l < W.size(); ++l) {
    std::vector<std::vector<double>> w(static_cast<std::size_t>(W[l].rows()));
    for (Eigen::Index r = 0; r < W[l].rows(); ++r)
      for (Eigen::Index c = 0; c < W[l].cols(); ++c) w[static_cast<std::size_t>(r)].push_back(W[l](r, c));
    layers.push_back({{"weights", w}, {"bias", std::vector<double>(b[l].data(), b[l].data() + b[l].size())}});
  }
  return Json{{"activation", to_string(activation)}, {"layers", layers}};
}

Mlp Mlp::from_json(const Json& j) {
  Mlp m;
  m.activation = parse_activation(j.at("activation").get<std::string>());
  for (const auto& layer : j.at("layers")) {
    const auto w = layer.at("weights").get<std::vector<std::vector<double>>>();
    const auto bias = layer.at("bias").get<std::vector<double>>();
    if (w.empty()) throw_data("MLP JSON: empty layer");
    Eigen::MatrixXd W(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(bias.size()));
    for (std::size_t r = 0; r < w.size(); ++r) {
      if (w[r].size() != bias.size()) throw_data("MLP JSON: weight and bias widths differ");
      for (std::size_t c = 0; c < bias.size(); ++c) W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r][c];
    }
    if (!m.W.empty() && m.W.back().cols() != W.rows()) throw_data("MLP JSON: layer widths do not chain");
    m.W.push_back(W);
    m.b.push_back(Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size())));
  }
  if (m.W.empty()) throw_data("MLP JSON: no layers");
  return m;
}

Mlp init_mlp(int n_inputs, int n_outputs, const MlpOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  Mlp m;
  m.activation = opt.activation;
  std::vector<int> widths{n_inputs};
  for (int h : opt.hidden) {
    if (h < 1) throw_parameter("MLP: hidden layer widths must be >= 1");
    widths.push_back(h);
  }
  widths.push_back(n_outputs);
  const double factor = opt.activation == Activation::logistic ? 2.0 : 6.0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double bound = std::sqrt(factor / (widths[l] + widths[l + 1]));
    Eigen::MatrixXd W(widths[l], widths[l + 1]);
    Eigen::VectorXd b(widths[l + 1]);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index c = 0; c < b.size(); ++c) b[c] = rng.uniform(-bound, bound);
    m.W.push_back(std::move(W));
    m.b.push_back(std::move(b));
  }
  return m;
}

Mlp train_mlp(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes, const MlpOptions& opt,
              std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || y.size() != n) throw_parameter("MLP: label count does not match rows");
  if (opt.epochs < 1 || opt.batch_size < 1 || !(opt.learning_rate > 0) || opt.momentum < 0 || opt.momentum >= 1)
    throw_parameter("MLP: invalid optimiser settings");
  Rng rng(seed);
  Mlp m = init_mlp(static_cast<int>(X.cols()), n_classes, opt, rng.next());
  std::vector<Eigen::MatrixXd> vW, gW;
  std::vector<Eigen::VectorXd> vb, gb;
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    vW.push_back(Eigen::MatrixXd::Zero(m.W[l].rows(), m.W[l].cols()));
    vb.push_back(Eigen::VectorXd::Zero(m.b[l].size()));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto bs = std::min<std::size_t>(static_cast<std::size_t>(opt.batch_size), n);
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      xb.resize(static_cast<Eigen::Index>(end - start), X.cols());
      yb.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = X.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = y[order[i]];
      }
      const double loss = m.loss_and_gradient(xb, yb, opt.alpha, gW, gb);
      epoch_loss += loss * static_cast<double>(end - start);
      for (std::size_t l = 0; l < m.W.size(); ++l) {
        vW[l] = opt.momentum * vW[l] - opt.learning_rate * gW[l];
        vb[l] = opt.momentum * vb[l] - opt.learning_rate * gb[l];
        m.W[l] += vW[l];
        m.b[l] += vb[l];
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw_data("MLP training diverged (non-finite loss)");
    m.loss_curve.push_back(epoch_loss);
    if (epoch_loss > best - opt.tol) {
      if (++stale > opt.patience) break;
    } else {
      stale = 0;
    }
    best = std::min(best, epoch_loss);
  }
  return m;
}

}  // namespace rbc
