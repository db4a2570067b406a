#include "rbc/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rbc/error.hpp"
#include "rbc/parallel.hpp"

namespace rbc {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Kernel rows computed on demand with a FIFO cache bounded by bytes.
class KernelRows {
public:
  KernelRows(const Eigen::MatrixXd& X, double gamma) : X_(X), gamma_(gamma) {
    const auto n = static_cast<std::size_t>(X.rows());
    norms_ = X.rowwise().squaredNorm();
    slot_.assign(n, -1);
    const std::size_t budget = std::size_t{256} << 20;
    capacity_ = std::max<std::size_t>(2, std::min(n, budget / (sizeof(double) * std::max<std::size_t>(n, 1))));
    rows_.resize(capacity_);
    owner_.assign(capacity_, -1);
  }

  /// The row stays valid until the next call unless it is passed back as
  /// `keep` so a pair of rows can be held at once.
  const std::vector<double>& row(std::size_t i, long keep = -1) {
    if (slot_[i] >= 0) return rows_[static_cast<std::size_t>(slot_[i])];
    std::size_t s = next_++ % capacity_;
    if (keep >= 0 && owner_[s] == keep) s = next_++ % capacity_;
    if (owner_[s] >= 0) slot_[static_cast<std::size_t>(owner_[s])] = -1;
    owner_[s] = static_cast<long>(i);
    slot_[i] = static_cast<long>(s);
    auto& r = rows_[s];
    const auto n = static_cast<std::size_t>(X_.rows());
    r.resize(n);
    const Eigen::VectorXd dots = X_ * X_.row(static_cast<Eigen::Index>(i)).transpose();
    for (std::size_t j = 0; j < n; ++j) {
      const double d2 = std::max(0.0, norms_[static_cast<Eigen::Index>(i)] + norms_[static_cast<Eigen::Index>(j)] -
                                          2 * dots[static_cast<Eigen::Index>(j)]);
      r[j] = std::exp(-gamma_ * d2);
    }
    r[i] = 1.0;
    return r;
  }

private:
  const Eigen::MatrixXd& X_;
  double gamma_;
  Eigen::VectorXd norms_;
  std::vector<long> slot_;
  std::vector<long> owner_;
  std::vector<std::vector<double>> rows_;
  std::size_t capacity_ = 0;
  std::size_t next_ = 0;
};

}  // namespace

double BinarySvm::decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double s = 0;
  for (Eigen::Index i = 0; i < sv.rows(); ++i) s += coef[i] * rbf_kernel(sv.row(i), x, gamma);
  return s - rho;
}

Json BinarySvm::to_json() const {
  Json svs = Json::array();
  for (Eigen::Index i = 0; i < sv.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(sv.cols()));
    for (Eigen::Index j = 0; j < sv.cols(); ++j) r[static_cast<std::size_t>(j)] = sv(i, j);
    svs.push_back(r);
  }
  return Json{{"gamma", gamma},
              {"rho", rho},
              {"coef", std::vector<double>(coef.data(), coef.data() + coef.size())},
              {"support_vectors", svs}};
}

BinarySvm BinarySvm::from_json(const Json& j) {
  BinarySvm m;
  m.gamma = j.at("gamma").get<double>();
  m.rho = j.at("rho").get<double>();
  const auto c = j.at("coef").get<std::vector<double>>();
  const auto svs = j.at("support_vectors").get<std::vector<std::vector<double>>>();
  if (c.size() != svs.size()) throw_data("SVM JSON: coefficient and support vector counts differ");
  m.coef = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  const std::size_t d = svs.empty() ? 0 : svs[0].size();
  m.sv.resize(static_cast<Eigen::Index>(svs.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < svs.size(); ++i) {
    if (svs[i].size() != d) throw_data("SVM JSON: ragged support vectors");
    for (std::size_t k = 0; k < d; ++k) m.sv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = svs[i][k];
  }
  return m;
}

BinarySvm train_binary_svm(const Eigen::MatrixXd& X, std::span<const int> y, const SmoOptions& opt) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || y.size() != n) throw_parameter("SVM: label count does not match rows");
  if (!(opt.C > 0) || !(opt.gamma > 0)) throw_parameter("SVM: C and gamma must be positive");
  for (int v : y)
    if (v != 1 && v != -1) throw_parameter("SVM: labels must be +1 or -1");
  const double C = opt.C;
  const std::int64_t max_iter =
      opt.max_iter > 0 ? opt.max_iter : static_cast<std::int64_t>(10000) * static_cast<std::int64_t>(n);

  KernelRows K(X, opt.gamma);
  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  const auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  const auto lower = [&](std::size_t t) { return alpha[t] <= 0; };

  BinarySvm m;
  m.gamma = opt.gamma;
  std::int64_t iter = 0;
  double gap = kInf;
  for (; iter < max_iter; ++iter) {
    // First index: maximal violation.
    double gmax = -kInf;
    long ii = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -G[t] >= gmax) gmax = -G[t], ii = static_cast<long>(t);
      } else if (!lower(t) && G[t] >= gmax) {
        gmax = G[t], ii = static_cast<long>(t);
      }
    }
    if (ii < 0) {
      gap = 0;
      break;
    }
    const auto i = static_cast<std::size_t>(ii);
    const auto& Ki = K.row(i);
    // Second index: largest second-order decrease of the objective.
    double gmax2 = -kInf, best = kInf;
    long jj = -1;
    for (std::size_t t = 0; t < n; ++t) {
      const double qit = static_cast<double>(y[i] * y[t]) * Ki[t];
      if (y[t] == 1) {
        if (lower(t)) continue;
        const double diff = gmax + G[t];
        if (G[t] >= gmax2) gmax2 = G[t];
        if (diff > 0) {
          double quad = 2.0 - 2.0 * y[i] * qit;
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) best = obj, jj = static_cast<long>(t);
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - G[t];
        if (-G[t] >= gmax2) gmax2 = -G[t];
        if (diff > 0) {
          double quad = 2.0 + 2.0 * y[i] * qit;
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) best = obj, jj = static_cast<long>(t);
        }
      }
    }
    gap = gmax + gmax2;
    if (gap < opt.tol || jj < 0) break;
    const auto j = static_cast<std::size_t>(jj);
    const double Qij = static_cast<double>(y[i] * y[j]) * Ki[j];
    const double oi = alpha[i], oj = alpha[j];
    if (y[i] != y[j]) {
      double quad = 2.0 + 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
      } else if (alpha[j] > C) {
        alpha[j] = C, alpha[i] = C + diff;
      }
    } else {
      double quad = 2.0 - 2.0 * Qij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
      } else if (alpha[j] < 0) {
        alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - oi, daj = alpha[j] - oj;
    const auto& Ri = K.row(i);
    const auto& Rj = K.row(j, static_cast<long>(i));
    for (std::size_t t = 0; t < n; ++t)
      G[t] += static_cast<double>(y[t]) * (y[i] * Ri[t] * dai + y[j] * Rj[t] * daj);
  }
  m.iterations = iter;
  m.kkt_gap = gap;
  m.converged = gap < opt.tol;

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0;
  int nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yG = y[t] * G[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else {
      ++nr_free;
      sum_free += yG;
    }
  }
  m.rho = nr_free > 0 ? sum_free / nr_free : (ub + lb) / 2;

  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0) sv.push_back(t);
  m.sv.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  m.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    m.sv.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(sv[k]));
    m.coef[static_cast<Eigen::Index>(k)] = alpha[sv[k]] * y[sv[k]];
  }
  m.alpha = std::move(alpha);
  return m;
}

double kkt_violation(const Eigen::MatrixXd& X, std::span<const int> y, const BinarySvm& m, double C) {
  // With f(x) = sum a_j y_j K(x_j, x) - rho, optimality requires
  // y f >= 1 at a = 0, y f = 1 for 0 < a < C, y f <= 1 at a = C.
  double worst = 0;
  for (Eigen::Index t = 0; t < X.rows(); ++t) {
    double f = -m.rho;
    for (Eigen::Index k = 0; k < X.rows(); ++k) {
      const double a = m.alpha[static_cast<std::size_t>(k)];
      if (a > 0) f += a * y[static_cast<std::size_t>(k)] * rbf_kernel(X.row(k), X.row(t), m.gamma);
    }
    const double yf = y[static_cast<std::size_t>(t)] * f;
    const double a = m.alpha[static_cast<std::size_t>(t)];
    double v = 0;
    if (a <= 0) v = std::max(0.0, 1 - yf);
    else if (a >= C) v = std::max(0.0, yf - 1);
    else v = std::abs(yf - 1);
    worst = std::max(worst, v);
  }
  return worst;
}

int SvmModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::vector<double> votes(static_cast<std::size_t>(n_classes), 0.0), margin(votes.size(), 0.0);
  for (std::size_t k = 0; k < machines.size(); ++k) {
    const double f = machines[k].decision(x);
    const auto [a, b] = pairs[k];
    if (f > 0) votes[static_cast<std::size_t>(a)] += 1;
    else votes[static_cast<std::size_t>(b)] += 1;
    margin[static_cast<std::size_t>(a)] += f;
    margin[static_cast<std::size_t>(b)] -= f;
  }
  int best = 0;
  for (int c = 1; c < n_classes; ++c) {
    const auto cu = static_cast<std::size_t>(c), bu = static_cast<std::size_t>(best);
    if (votes[cu] > votes[bu] || (votes[cu] == votes[bu] && margin[cu] > margin[bu])) best = c;
  }
  return best;
}

Json SvmModel::to_json() const {
  Json ms = Json::array();
  for (std::size_t k = 0; k < machines.size(); ++k) {
    Json m = machines[k].to_json();
    m["classes"] = {pairs[k].first, pairs[k].second};
    ms.push_back(m);
  }
  return Json{{"n_classes", n_classes}, {"gamma", gamma}, {"machines", ms}};
}

SvmModel SvmModel::from_json(const Json& j) {
  SvmModel s;
  s.n_classes = j.at("n_classes").get<int>();
  s.gamma = j.at("gamma").get<double>();
  for (const auto& m : j.at("machines")) {
    const auto c = m.at("classes").get<std::vector<int>>();
    if (c.size() != 2 || c[0] < 0 || c[1] < 0 || c[0] >= s.n_classes || c[1] >= s.n_classes)
      throw_data("SVM JSON: bad class pair");
    s.pairs.emplace_back(c[0], c[1]);
    s.machines.push_back(BinarySvm::from_json(m));
  }
  return s;
}

SvmModel train_svm(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes, const SmoOptions& opt) {
  SvmModel s;
  s.n_classes = n_classes;
  s.gamma = opt.gamma;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < y.size(); ++i) members[static_cast<std::size_t>(y[i])].push_back(i);
  for (int a = 0; a < n_classes; ++a)
    for (int b = a + 1; b < n_classes; ++b)
      if (!members[static_cast<std::size_t>(a)].empty() && !members[static_cast<std::size_t>(b)].empty())
        s.pairs.emplace_back(a, b);
  s.machines.resize(s.pairs.size());
  parallel_for(s.pairs.size(), [&](std::size_t k) {
    const auto& ma = members[static_cast<std::size_t>(s.pairs[k].first)];
    const auto& mb = members[static_cast<std::size_t>(s.pairs[k].second)];
    std::vector<std::size_t> idx(ma);
    idx.insert(idx.end(), mb.begin(), mb.end());
    std::sort(idx.begin(), idx.end());
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), X.cols());
    std::vector<int> ys(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      sub.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
      ys[r] = y[idx[r]] == s.pairs[k].first ? 1 : -1;
    }
    s.machines[k] = train_binary_svm(sub, ys, opt);
    s.machines[k].alpha.clear();
  });
  return s;
}

}  // namespace rbc
