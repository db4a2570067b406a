#include "rbc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rbc/error.hpp"
#include "rbc/features.hpp"
#include "rbc/parallel.hpp"

namespace rbc {

// ---------------------------------------------------------------------------
// Importance rankings
// ---------------------------------------------------------------------------

std::vector<std::string> ImportanceRanking::names(std::size_t top) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < entries.size() && i < top; ++i) out.push_back(entries[i].first);
  return out;
}

Json ImportanceRanking::to_json() const {
  Json a = Json::array();
  for (const auto& [name, score] : entries) a.push_back({{"feature", name}, {"importance", score}});
  return a;
}

ImportanceRanking ImportanceRanking::from_json(const Json& j) {
  ImportanceRanking r;
  try {
    for (const auto& e : j) r.entries.emplace_back(e.at("feature").get<std::string>(), e.at("importance").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed ranking JSON: ") + e.what());
  }
  return r;
}

namespace {

ImportanceRanking rank(const std::vector<std::string>& names, const std::vector<double>& scores) {
  if (scores.size() != names.size()) throw_data("importance vector does not match the feature list");
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  ImportanceRanking r;
  for (auto i : order) r.entries.emplace_back(names[i], scores[i]);
  return r;
}

}  // namespace

ImportanceRanking rf_importance(const TrainedModel& m) {
  if (!std::holds_alternative<TreeEnsemble>(m.fitted()))
    throw_parameter("rf_importance needs a fitted tree ensemble, got " + to_string(m.family()));
  return rank(m.feature_names(), m.feature_importances());
}

ImportanceRanking gb_importance(const TrainedModel& m) {
  if (!std::holds_alternative<GbModel>(m.fitted()))
    throw_parameter("gb_importance needs a fitted boosting model, got " + to_string(m.family()));
  return rank(m.feature_names(), m.feature_importances());
}

// ---------------------------------------------------------------------------
// Wrapper selection
// ---------------------------------------------------------------------------

std::vector<std::size_t> wrapper_sizes(std::size_t d) {
  std::vector<std::size_t> s;
  for (std::size_t k = 1; k <= d && k <= 30; ++k) s.push_back(k);
  for (std::size_t k = 35; k < d; k += 5) s.push_back(k);
  if (d > 30) s.push_back(d);
  return s;
}

WrapperResult wrapper_incremental(const ParamSpace& space, const ModelSpec& base, const ImportanceRanking& ranking,
                                  const Dataset& train, const SearchOptions& opt, std::vector<std::size_t> sizes) {
  if (ranking.entries.empty()) throw_parameter("wrapper selection needs a non-empty ranking");
  if (sizes.empty()) sizes = wrapper_sizes(ranking.entries.size());
  for (auto s : sizes)
    if (s < 1 || s > ranking.entries.size()) throw_parameter("wrapper prefix size out of range");
  WrapperResult r;
  r.sizes = sizes;
  r.scores.resize(sizes.size());
  r.specs.resize(sizes.size());
  parallel_for(sizes.size(), [&](std::size_t i) {
    const auto names = ranking.names(sizes[i]);
    const auto res = grid_search(space, base, train.select_features(names), opt);
    r.scores[i] = res.best_score;
    r.specs[i] = res.best_spec;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const bool better = r.scores[i] > r.scores[best] || (r.scores[i] == r.scores[best] && sizes[i] < sizes[best]);
    if (better) best = i;
  }
  r.best_size = sizes[best];
  r.best_score = r.scores[best];
  r.best_spec = r.specs[best];
  r.best_features = ranking.names(r.best_size);
  return r;
}

Json WrapperResult::to_json() const {
  Json curve = Json::array();
  for (std::size_t i = 0; i < sizes.size(); ++i)
    curve.push_back({{"size", sizes[i]}, {"score", scores[i]}, {"params", specs[i].params}});
  return Json{{"best_size", best_size},
              {"best_score", best_score},
              {"best_spec", best_spec.to_json()},
              {"best_features", best_features},
              {"curve", curve}};
}

std::string WrapperResult::curve_csv() const {
  std::ostringstream os;
  os << "size,score\n";
  for (std::size_t i = 0; i < sizes.size(); ++i) os << sizes[i] << ',' << format_number(scores[i]) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

Eigen::MatrixXd Projection::project(const Eigen::MatrixXd& X) const {
  if (X.cols() != mean.size()) throw_data("projection input width does not match the fitted width");
  return (X.rowwise() - mean.transpose()) * components;
}

Eigen::MatrixXd Projection::reconstruct(const Eigen::MatrixXd& Z) const {
  Eigen::MatrixXd X = Z * components.transpose();
  X.rowwise() += mean.transpose();
  return X;
}

Projection Projection::truncated(std::size_t m) const {
  if (m < 1 || m > static_cast<std::size_t>(components.cols())) throw_parameter("component count out of range");
  Projection p = *this;
  p.components = components.leftCols(static_cast<Eigen::Index>(m));
  p.ratios.resize(m);
  return p;
}

std::size_t Projection::components_for(double fraction) const {
  double cum = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    cum += ratios[i];
    if (cum > fraction) return i + 1;
  }
  return ratios.size();
}

Dataset Projection::apply(const Dataset& ds) const {
  Dataset out = ds;
  out.X = project(ds.X);
  out.feature_names.clear();
  const std::string prefix = kind == "lda" ? "LD" : "PC";
  for (Eigen::Index j = 0; j < out.X.cols(); ++j) out.feature_names.push_back(prefix + std::to_string(j + 1));
  return out;
}

Json Projection::to_json() const {
  Json comps = Json::array();
  for (Eigen::Index j = 0; j < components.cols(); ++j)
    comps.push_back(std::vector<double>(components.col(j).data(), components.col(j).data() + components.rows()));
  return Json{{"kind", kind},
              {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
              {"components", comps},
              {"ratios", ratios},
              {"warnings", warnings}};
}

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0) v = -v;
}

}  // namespace

Projection pca_fit(const Eigen::MatrixXd& X) {
  if (X.rows() < 2) throw_data("PCA needs at least two rows");
  Projection p;
  p.kind = "pca";
  p.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd C = X.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov = (C.transpose() * C) / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw_data("PCA eigendecomposition failed");
  const auto d = cov.rows();
  Eigen::VectorXd ev = es.eigenvalues().reverse().cwiseMax(0.0);
  const double total = ev.sum();
  if (!(total > 0)) throw_data("PCA input has zero variance");
  p.components = es.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < d; ++j) {
    fix_sign(p.components.col(j));
    p.ratios.push_back(ev[j] / total);
  }
  return p;
}

Projection lda_fit(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw_data("LDA: label count does not match rows");
  std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(n_classes), Eigen::VectorXd::Zero(d));
  std::vector<double> counts(static_cast<std::size_t>(n_classes), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
    if (c >= counts.size()) throw_data("LDA: label out of range");
    means[c] += X.row(i).transpose();
    counts[c] += 1;
  }
  int present = 0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0) {
      means[c] /= counts[c];
      ++present;
    }
  if (present < 2) throw_data("LDA needs at least two classes with members");

  Projection p;
  p.kind = "lda";
  p.mean = X.colwise().mean().transpose();
  Eigen::MatrixXd Sw = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd Sb = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd r = X.row(i).transpose() - means[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
    Sw.noalias() += r * r.transpose();
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    const Eigen::VectorXd m = means[c] - p.mean;
    Sb.noalias() += counts[c] * m * m.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sw_eig(Sw, Eigen::EigenvaluesOnly);
  const double max_ev = sw_eig.eigenvalues().maxCoeff();
  if (!(sw_eig.eigenvalues().minCoeff() > 1e-10 * max_ev)) {
    const double scale = Sw.diagonal().mean() > 0 ? Sw.diagonal().mean() : 1.0;
    Sw.diagonal().array() += 1e-6 * scale;
    p.warnings.push_back("within-class scatter is singular; added a 1e-6 ridge");
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Sb, Sw);
  if (ges.info() != Eigen::Success) throw_data("LDA eigendecomposition failed");
  const Eigen::VectorXd ev = ges.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vecs = ges.eigenvectors().rowwise().reverse();
  const auto m = std::min<Eigen::Index>(present - 1, d);
  const double total = ev.sum();
  p.components.resize(d, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd v = vecs.col(j).normalized();
    fix_sign(v);
    p.components.col(j) = v;
    p.ratios.push_back(total > 0 ? ev[j] / total : 0.0);
  }
  return p;
}

}  // namespace rbc
