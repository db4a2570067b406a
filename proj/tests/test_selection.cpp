#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "rbc/error.hpp"
#include "rbc/selection.hpp"
#include "synthetic.hpp"

using namespace rbc;

namespace {

// Cyclic Jacobi rotations; returns eigenvalues in descending order.
std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd A) {
  const auto n = A.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = A(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

// Feature 0 is the label; the rest are noise.
Dataset planted(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.classes = {"c", "e", "o"};
  ds.X.resize(n, d);
  for (int j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  for (int i = 0; i < n; ++i) {
    const int k = i % 3;
    ds.y.push_back(k);
    ds.X(i, 0) = k;
    for (int j = 1; j < d; ++j) ds.X(i, j) = rng.normal();
  }
  return ds;
}

std::map<std::string, double> as_map(const ImportanceRanking& r) {
  std::map<std::string, double> m;
  for (const auto& [n, s] : r.entries) m[n] = s;
  return m;
}

}  // namespace

TEST_CASE("importance rankings") {
  // Noise splits taken while the signal column is not sampled keep a share
  // that shrinks with n (about 0.25 at n = 150, 0.06 at n = 2000 for six
  // columns); n = 2000 puts the signal clearly above 0.9.
  const auto ds = planted(2000, 6, 1);
  const auto rf = fit(preset(Family::random_forest, Preset::paper_sds, 3), ds);
  const auto gb = fit(preset(Family::gradient_boosting, Preset::library_default, 3), ds);
  for (const auto& r : {rf_importance(rf), gb_importance(gb)}) {
    REQUIRE(r.entries.size() == 6);
    CHECK(r.entries[0].first == "f0");
    CHECK(r.entries[0].second > 0.9);
    double sum = 0;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      CHECK(r.entries[i].second >= 0);
      if (i > 0) CHECK(r.entries[i].second <= r.entries[i - 1].second);
      sum += r.entries[i].second;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ImportanceRanking::from_json(r.to_json()).entries == r.entries);
  }
  const auto one = ds.select_features(std::vector<std::string>{"f0"});
  CHECK(rf_importance(fit(preset(Family::random_forest, Preset::library_default), one)).entries[0].second == 1.0);
  CHECK(gb_importance(fit(preset(Family::gradient_boosting, Preset::library_default), one)).entries[0].second ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(rf_importance(gb), Error);
  CHECK_THROWS_AS(gb_importance(rf), Error);
  CHECK_THROWS_AS(rf_importance(fit(preset(Family::knn, Preset::library_default), ds)), Error);
}

TEST_CASE("importance rankings follow column permutations") {
  // Split-score ties (two columns inducing the same partition of a small
  // node) are broken by column index, so the check uses shallow trees with
  // large nodes where such ties do not occur.
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const auto check = [&](const ModelSpec& spec, const Dataset& ds, auto importance) {
    const auto a = as_map(importance(fit(spec, ds)));
    const auto b = as_map(importance(fit(spec, ds.select_columns(perm))));
    for (const auto& [name, v] : a) CHECK(b.at(name) == doctest::Approx(v).epsilon(1e-12));
  };
  auto rf = preset(Family::random_forest, Preset::paper_sds, 5);
  rf.params["max_features"] = "all";
  rf.params["max_depth"] = 2;
  rf.params["min_samples_leaf"] = 30;
  check(rf, synth::blobs({250, 200, 150}, 5, 1.5, 1.5, 4), rf_importance);
  auto gb = preset(Family::gradient_boosting, Preset::library_default, 5);
  gb.params["max_depth"] = 3;
  gb.params["min_child_weight"] = 5.0;
  check(gb, synth::blobs({50, 40, 30}, 5, 1.5, 1.5, 4), gb_importance);
}

TEST_CASE("wrapper prefix sizes") {
  const auto s = wrapper_sizes(121);
  CHECK(s.size() == 49);
  CHECK(s[29] == 30);
  CHECK(s[30] == 35);
  CHECK(s[47] == 120);
  CHECK(s.back() == 121);
  CHECK(wrapper_sizes(10) == std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(wrapper_sizes(31) == std::vector<std::size_t>{1,  2,  3,  4,  5,  6,  7,  8,  9,  10, 11,
                                                      12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22,
                                                      23, 24, 25, 26, 27, 28, 29, 30, 31});
}

TEST_CASE("wrapper selection") {
  const auto ds = planted(150, 5, 7);
  const auto ranking = rf_importance(fit(preset(Family::random_forest, Preset::library_default, 1), ds));
  SearchOptions o;
  o.scorer = Scorer::f_weighted;
  o.seed = 3;
  o.folds = 5;
  const auto space = ParamSpace::from_json({{"k", {3, 7}}});
  const ModelSpec base{Family::knn, Json::object(), 0};
  const auto w = wrapper_incremental(space, base, ranking, ds, o);
  CHECK(w.sizes.size() == 5);
  CHECK(w.best_size == 1);
  CHECK(w.best_features == std::vector<std::string>{"f0"});
  CHECK(w.best_score == doctest::Approx(1.0));
  CHECK(w.curve_csv().rfind("size,score\n1,", 0) == 0);

  // Curve at full size equals a plain grid search on every feature.
  const auto full = grid_search(space, base, ds.select_features(ranking.names()), o);
  CHECK(w.scores.back() == full.best_score);
  CHECK(w.specs.back() == full.best_spec);

  // Equal scores everywhere: the smallest prefix wins.
  const auto flat = wrapper_incremental(ParamSpace{}, ModelSpec{Family::knn, Json{{"k", 150 - 30}}, 0}, ranking, ds, o);
  for (double v : flat.scores) CHECK(v == flat.scores[0]);
  CHECK(flat.best_size == 1);
  CHECK_THROWS_AS(wrapper_incremental(space, base, ImportanceRanking{}, ds, o), Error);
}

TEST_CASE("pca on rank-one data") {
  Eigen::MatrixXd X(20, 2);
  for (int i = 0; i < 20; ++i) X(i, 0) = X(i, 1) = i * 0.37 - 2;
  const auto p = pca_fit(X);
  CHECK(p.ratios[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.components(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK(p.components(1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK(p.components_for(0.95) == 1);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Ones(5, 3)), Error);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Ones(1, 3)), Error);
}

TEST_CASE("pca on isotropic data") {
  Rng rng(2);
  Eigen::MatrixXd X(20000, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  const auto p = pca_fit(X);
  for (double r : p.ratios) CHECK(r == doctest::Approx(1.0 / 3).epsilon(0.05 * 3));
  for (double r : p.ratios) CHECK(std::abs(r - 1.0 / 3) < 0.05);
}

TEST_CASE("pca against an eigen oracle") {
  Rng rng(3);
  Eigen::MatrixXd X(50, 8);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rng.normal() * (j + 1) + (j == 2 ? 3 * X(i, 0) : 0);
  const auto p = pca_fit(X);
  CHECK((p.reconstruct(p.project(X)) - X).cwiseAbs().maxCoeff() < 1e-8);
  const Eigen::MatrixXd gram = p.components.transpose() * p.components;
  CHECK((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-8);

  const Eigen::MatrixXd C = X.rowwise() - X.colwise().mean();
  const auto ev = jacobi_eigenvalues((C.transpose() * C) / 49.0);
  const double total = std::accumulate(ev.begin(), ev.end(), 0.0);
  double sum = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(p.ratios[k] == doctest::Approx(ev[k] / total).epsilon(1e-9));
    if (k > 0) CHECK(p.ratios[k] <= p.ratios[k - 1]);
    sum += p.ratios[k];
    const auto col = p.components.col(static_cast<Eigen::Index>(k));
    Eigen::Index arg;
    col.cwiseAbs().maxCoeff(&arg);
    CHECK(col[arg] > 0);
  }
  CHECK(sum <= 1 + 1e-12);

  const Eigen::MatrixXd Z = p.project(X);
  const Eigen::MatrixXd cov = (Z.transpose() * Z) / 49.0;
  for (Eigen::Index a = 0; a < 8; ++a)
    for (Eigen::Index b = 0; b < 8; ++b)
      if (a != b) CHECK(std::abs(cov(a, b)) < 1e-8);

  const auto t = p.truncated(3);
  CHECK(t.components.cols() == 3);
  CHECK(t.ratios.size() == 3);
  Dataset ds;
  ds.X = X;
  ds.y.assign(50, 0);
  ds.classes = {"c"};
  for (int j = 0; j < 8; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  CHECK(t.apply(ds).feature_names == std::vector<std::string>{"PC1", "PC2", "PC3"});
}

TEST_CASE("lda separates classes and respects the rank bound") {
  SUBCASE("two classes") {
    const auto ds = synth::blobs({100, 100}, 2, 0.5, 3, 5);
    const auto p = lda_fit(ds.X, ds.y, 2);
    REQUIRE(p.components.cols() == 1);
    CHECK(p.ratios[0] == doctest::Approx(1.0));
    const Eigen::VectorXd z = p.project(ds.X).col(0);
    double m[2] = {0, 0}, s[2] = {0, 0};
    for (int c = 0; c < 2; ++c) {
      int n = 0;
      for (Eigen::Index i = 0; i < z.size(); ++i)
        if (ds.y[static_cast<std::size_t>(i)] == c) m[c] += z[i], ++n;
      m[c] /= n;
      for (Eigen::Index i = 0; i < z.size(); ++i)
        if (ds.y[static_cast<std::size_t>(i)] == c) s[c] += (z[i] - m[c]) * (z[i] - m[c]);
      s[c] = std::sqrt(s[c] / (n - 1));
    }
    CHECK(std::abs(m[0] - m[1]) > 5 * std::max(s[0], s[1]));
    CHECK(p.warnings.empty());
  }
  SUBCASE("three classes give two components, invariant to relabelling") {
    const auto ds = synth::blobs({60, 50, 40}, 5, 1.0, 2, 6);
    const auto p = lda_fit(ds.X, ds.y, 3);
    REQUIRE(p.components.cols() == 2);
    CHECK(p.ratios[0] + p.ratios[1] == doctest::Approx(1.0));
    CHECK(p.ratios[0] >= p.ratios[1]);
    std::vector<int> relabel;
    for (int v : ds.y) relabel.push_back((v + 1) % 3);
    const auto q = lda_fit(ds.X, relabel, 3);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double dot = std::abs(p.components.col(j).dot(q.components.col(j)));
      CHECK(dot == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("singular within-class scatter gets a ridge") {
    auto ds = synth::blobs({40, 40, 40}, 3, 1.0, 2, 7);
    ds.X.col(2) = ds.X.col(0);
    const auto p = lda_fit(ds.X, ds.y, 3);
    CHECK(p.warnings.size() == 1);
    CHECK(p.components.allFinite());
    CHECK(p.components.cols() == 2);
  }
  SUBCASE("one populated class is an error") {
    const auto ds = synth::blobs({10}, 2, 1.0, 2, 8);
    CHECK_THROWS_AS(lda_fit(ds.X, ds.y, 3), Error);
  }
}
