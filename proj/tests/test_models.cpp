#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "doctest.h"
#include "rbc/error.hpp"
#include "rbc/models.hpp"
#include "rbc/parallel.hpp"
#include "synthetic.hpp"

using namespace rbc;

namespace {

Dataset train_part(const Dataset& ds, std::uint64_t seed, Dataset* test = nullptr) {
  const auto s = split_train_test(ds.y, 0.7, seed);
  if (test) *test = ds.subset(s.test);
  return ds.subset(s.train);
}

ModelSpec spec(Family f, Json params, std::uint64_t seed = 1) { return ModelSpec{f, std::move(params), seed}; }

Dataset shape_data(std::uint64_t seed) {
  // Two-class table with the columns the rule baselines read.
  Rng rng(seed);
  Dataset ds;
  ds.classes = {"c", "e"};
  ds.feature_names = {"Area", "Circularity", "Eccentricity"};
  ds.X.resize(200, 3);
  for (int i = 0; i < 200; ++i) {
    const bool normal = i < 120;
    ds.X(i, 0) = rng.uniform(500, 900);
    ds.X(i, 1) = normal ? rng.uniform(0.8, 1.0) : rng.uniform(0.3, 0.7);
    ds.X(i, 2) = normal ? rng.uniform(0.75, 1.0) : rng.uniform(0.2, 0.6);
    ds.y.push_back(normal ? 0 : 1);
  }
  return ds;
}

}  // namespace

TEST_CASE("mlp analytic gradient matches central differences") {
  Rng rng(5);
  Eigen::MatrixXd X(5, 4);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  const std::vector<int> y{0, 2, 1, 2, 0};
  for (auto act : {Activation::identity, Activation::tanh, Activation::logistic, Activation::relu}) {
    CAPTURE(to_string(act));
    MlpOptions opt;
    opt.hidden = {6, 3};
    opt.activation = act;
    Mlp m = init_mlp(4, 3, opt, 11);
    const double alpha = 0.3;
    std::vector<Eigen::MatrixXd> gW, gW2;
    std::vector<Eigen::VectorXd> gb, gb2;
    m.loss_and_gradient(X, y, alpha, gW, gb);
    const double h = 1e-6;
    double worst = 0;
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = m.loss_and_gradient(X, y, alpha, gW2, gb2);
      param = keep - h;
      const double down = m.loss_and_gradient(X, y, alpha, gW2, gb2);
      param = keep;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    };
    for (std::size_t l = 0; l < m.W.size(); ++l) {
      for (Eigen::Index k = 0; k < m.W[l].size(); ++k) check(m.W[l].data()[k], gW[l].data()[k]);
      for (Eigen::Index k = 0; k < m.b[l].size(); ++k) check(m.b[l].data()[k], gb[l].data()[k]);
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("mlp training lowers the loss and stops on a plateau") {
  const auto ds = synth::blobs({60, 60, 60}, 2, 0.5, 4, 3);
  MlpOptions opt;
  opt.hidden = {8};
  opt.epochs = 400;
  const auto m = train_mlp(ds.X, ds.y, 3, opt, 9);
  REQUIRE(m.loss_curve.size() >= 2);
  CHECK(m.loss_curve.back() < m.loss_curve.front());
  CHECK(m.loss_curve.size() < 400u);
}

TEST_CASE("svm dual satisfies the KKT conditions") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto ds = synth::blobs({70, 50}, 3, 1.2, 1.5, seed);
    std::vector<int> ypm;
    for (int v : ds.y) ypm.push_back(v == 0 ? 1 : -1);
    for (double C : {0.5, 10.0}) {
      SmoOptions o;
      o.C = C;
      o.gamma = 0.4;
      const auto m = train_binary_svm(ds.X, ypm, o);
      CHECK(m.converged);
      CHECK(kkt_violation(ds.X, ypm, m, C) < 1e-3);
      double balance = 0;
      for (std::size_t i = 0; i < m.alpha.size(); ++i) {
        CHECK(m.alpha[i] >= 0);
        CHECK(m.alpha[i] <= C);
        balance += m.alpha[i] * ypm[i];
      }
      CHECK(std::abs(balance) < 1e-9);
    }
  }
}

TEST_CASE("svm on two symmetric points") {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 1, 1;
  const std::vector<int> ypm{1, -1};
  SmoOptions o;
  o.C = 10;
  o.gamma = 0.01;
  const auto m = train_binary_svm(X, ypm, o);
  CHECK(m.decision(X.row(0)) > 0);
  CHECK(m.decision(X.row(1)) < 0);
  Eigen::RowVectorXd mid(2);
  mid << 0.5, 0.5;
  CHECK(std::abs(m.decision(mid)) < 1e-9);

  Dataset ds;
  ds.X = X;
  ds.y = {0, 1};
  ds.classes = {"c", "e"};
  ds.feature_names = {"a", "b"};
  const auto tm = fit(spec(Family::svm_rbf, {{"C", 10.0}, {"gamma", 0.01}}), ds);
  CHECK(tm.predict(ds) == ds.y);
}

TEST_CASE("gradient boosting training loss never increases") {
  const auto ds = synth::blobs({80, 60, 40}, 4, 1.5, 2, 4);
  for (double sub : {1.0, 0.7}) {
    for (double mds : {0.0, 0.5}) {
      GbOptions o;
      o.stage_count = 40;
      o.subsample = sub;
      o.tree.max_delta_step = mds;
      o.tree.max_depth = 4;
      const auto m = train_gb(ds.X, ds.y, 3, o, 7);
      REQUIRE(m.train_loss.size() == 41u);
      CHECK(m.train_loss.front() == doctest::Approx(std::log(3.0)));
      for (std::size_t s = 1; s < m.train_loss.size(); ++s) CHECK(m.train_loss[s] <= m.train_loss[s - 1]);
      CHECK(m.train_loss.back() < 0.5 * m.train_loss.front());
    }
  }
}

TEST_CASE("single unbagged forest tree over all features equals CART") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    const auto ds = synth::blobs({40, 30, 25}, 5, 2.0, 1.5, seed);
    const Json common = {{"min_samples_leaf", 2}, {"min_samples_split", 4}, {"max_depth", nullptr},
                         {"max_features", "all"}};
    Json rf = common;
    rf["tree_count"] = 1;
    rf["bootstrap"] = false;
    const auto a = fit(spec(Family::cart, common, seed), ds);
    const auto b = fit(spec(Family::random_forest, rf, seed + 100), ds);
    const auto& ta = std::get<TreeEnsemble>(a.fitted());
    const auto& tb = std::get<TreeEnsemble>(b.fitted());
    CHECK(ta.trees[0].to_json() == tb.trees[0].to_json());
    CHECK(a.predict(ds) == b.predict(ds));
    const auto ia = a.feature_importances(), ib = b.feature_importances();
    REQUIRE(ia.size() == ib.size());
    for (std::size_t j = 0; j < ia.size(); ++j) CHECK(ia[j] == doctest::Approx(ib[j]).epsilon(1e-12));
  }
}

TEST_CASE("knn agrees with a brute-force oracle") {
  const auto train = synth::blobs({50, 40, 30}, 3, 1.5, 1.0, 21);
  const auto query = synth::blobs({400, 300, 300}, 3, 2.0, 1.0, 22);
  for (double p : {1.0, 2.0, 3.0}) {
    for (bool weighted : {false, true}) {
      CAPTURE(p);
      CAPTURE(weighted);
      KnnModel m;
      m.n_classes = 3;
      m.k = 7;
      m.p = p;
      m.distance_weights = weighted;
      m.X = train.X;
      m.y = train.y;
      int mismatches = 0;
      for (Eigen::Index q = 0; q < query.X.rows(); ++q) {
        std::vector<std::pair<double, std::size_t>> d;
        for (Eigen::Index i = 0; i < train.X.rows(); ++i) {
          double s = 0;
          for (Eigen::Index j = 0; j < 3; ++j) s += std::pow(std::abs(train.X(i, j) - query.X(q, j)), p);
          d.emplace_back(std::pow(s, 1.0 / p), static_cast<std::size_t>(i));
        }
        std::sort(d.begin(), d.end());
        double votes[3] = {0, 0, 0};
        for (int r = 0; r < 7; ++r) votes[train.y[d[r].second]] += weighted ? 1.0 / d[r].first : 1.0;
        const int expect = static_cast<int>(std::max_element(votes, votes + 3) - votes);
        mismatches += m.predict_row(query.X.row(q)) != expect;
      }
      CHECK(mismatches == 0);
    }
  }
}

TEST_CASE("knn boundary cases") {
  const auto ds = synth::blobs({30, 50, 20}, 2, 1.0, 1.0, 8);
  SUBCASE("k = 1 reproduces the training labels") {
    const auto m = fit(spec(Family::knn, {{"k", 1}}), ds);
    CHECK(synth::accuracy(m.predict(ds), ds.y) == 1.0);
  }
  SUBCASE("k = n with uniform weights predicts the majority everywhere") {
    const auto m = fit(spec(Family::knn, {{"k", 100}, {"weights", "uniform"}}), ds);
    const auto other = synth::blobs({20, 20, 20}, 2, 3.0, 1.0, 9);
    for (int label : m.predict(other)) CHECK(label == 1);
  }
  SUBCASE("k larger than the training set is a data error") {
    try {
      fit(spec(Family::knn, {{"k", 101}}), ds);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::data);
    }
  }
  SUBCASE("exact matches dominate distance weighting") {
    KnnModel m;
    m.n_classes = 2;
    m.k = 3;
    m.distance_weights = true;
    m.X.resize(3, 1);
    m.X << 0, 0.1, 0.1;
    m.y = {0, 1, 1};
    Eigen::RowVectorXd q(1);
    q << 0;
    CHECK(m.predict_row(q) == 0);
  }
}

TEST_CASE("cart separates a linearly separable set") {
  Rng rng(3);
  Dataset ds;
  ds.classes = {"c", "e"};
  ds.feature_names = {"a", "b"};
  ds.X.resize(40, 2);
  for (int i = 0; i < 40; ++i) {
    double a, b;
    do {
      a = rng.uniform(-1, 1);
      b = rng.uniform(-1, 1);
    } while (std::abs(a + 0.5 * b) < 0.05);
    ds.X(i, 0) = a;
    ds.X(i, 1) = b;
    ds.y.push_back(a + 0.5 * b > 0 ? 1 : 0);
  }
  const auto m = fit(preset(Family::cart, Preset::library_default), ds);
  CHECK(synth::accuracy(m.predict(ds), ds.y) == 1.0);
}

TEST_CASE("every learned family classifies well-separated blobs") {
  const auto ds = synth::blobs({200, 200, 200}, 4, 0.6, 4, 31);
  Dataset test;
  const auto train = train_part(ds, 5, &test);
  for (Family f : learned_families()) {
    for (Preset p : {Preset::library_default, Preset::paper_sds}) {
      CAPTURE(to_string(f));
      CAPTURE(to_string(p));
      const auto m = fit(preset(f, p, 17), train);
      CHECK(synth::accuracy(m.predict(test), test.y) >= 0.95);
    }
  }
}

TEST_CASE("presets and parameter validation") {
  const auto rf = preset(Family::random_forest, Preset::paper_sds);
  CHECK(rf.params["tree_count"] == 300);
  CHECK(rf.params["min_samples_leaf"] == 2);
  CHECK(rf.params["max_features"] == "sqrt");
  CHECK(preset(Family::extra_trees, Preset::paper_sds).params["tree_count"] == 60);
  CHECK(preset(Family::extra_trees, Preset::library_default).params["bootstrap"] == false);
  CHECK(preset(Family::svm_rbf, Preset::paper_sds).params["C"] == 10.0);
  CHECK(preset(Family::knn, Preset::paper_sds).params["k"] == 10);
  CHECK(preset(Family::knn, Preset::paper_f).params["k"] == 9);
  CHECK(preset(Family::gradient_boosting, Preset::paper_sds).params["max_delta_step"] == 10.0);
  CHECK(preset(Family::gradient_boosting, Preset::paper_f).params["max_delta_step"] == 20.0);
  CHECK(preset(Family::mlp, Preset::paper_sds).params["hidden"] == Json({10, 3}));
  CHECK(preset(Family::cart, Preset::library_default).params["max_depth"].is_null());

  for (const auto& bad : std::vector<ModelSpec>{
           spec(Family::svm_rbf, {{"C", 0.0}}),
           spec(Family::svm_rbf, {{"gamma", -1.0}}),
           spec(Family::svm_rbf, {{"gamma", "auto"}}),
           spec(Family::knn, {{"k", 0}}),
           spec(Family::knn, {{"weights", "inverse"}}),
           spec(Family::random_forest, {{"tree_count", 0}}),
           spec(Family::random_forest, {{"n_estimators", 10}}),
           spec(Family::cart, {{"max_features", 1.5}}),
           spec(Family::gradient_boosting, {{"subsample", 0.0}}),
           spec(Family::mlp, {{"hidden", {10, 0}}}),
           spec(Family::mlp, {{"activation", "softplus"}}),
       }) {
    CAPTURE(bad.to_json().dump());
    try {
      resolve(bad);
      FAIL("expected a parameter error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parameter);
    }
  }
  const auto s = spec(Family::knn, {{"k", 3}}, 42);
  CHECK(ModelSpec::from_json(s.to_json()) == s);
  CHECK(parse_family("RF") == Family::random_forest);
  CHECK(parse_preset("tuned_f") == Preset::paper_f);
}

TEST_CASE("fits are deterministic and independent of the worker count") {
  const auto ds = synth::blobs({60, 50, 40}, 4, 1.5, 1.5, 41);
  for (Family f : learned_families()) {
    CAPTURE(to_string(f));
    const auto s = preset(f, Preset::paper_sds, 3);
    set_worker_count(1);
    const auto a = fit(s, ds).to_json();
    set_worker_count(4);
    const auto b = fit(s, ds).to_json();
    set_worker_count(0);
    CHECK(json_hash(a) == json_hash(b));
  }
  const auto r1 = fit(preset(Family::random_forest, Preset::library_default, 1), ds).to_json();
  const auto r2 = fit(preset(Family::random_forest, Preset::library_default, 2), ds).to_json();
  CHECK(r1 != r2);
}

TEST_CASE("saved models reload with identical predictions") {
  const auto ds = synth::blobs({60, 50, 40}, 4, 1.5, 1.5, 51);
  const auto dir = std::filesystem::path(RBC_TEST_OUTPUT) / "models";
  for (Family f : learned_families()) {
    CAPTURE(to_string(f));
    const auto m = fit(preset(f, Preset::paper_f, 3), ds);
    const auto path = dir / (to_string(f) + ".json");
    m.save(path);
    const auto back = TrainedModel::load(path);
    CHECK(back.predict(ds) == m.predict(ds));
    CHECK(back.to_json() == m.to_json());
    CHECK(back.spec() == m.spec());
  }
  const auto rule = fit(spec(Family::circularity_rule, Json::object()), shape_data(2));
  const auto back = TrainedModel::from_json(rule.to_json());
  CHECK(back.predict(shape_data(3)) == rule.predict(shape_data(3)));

  Json broken = rule.to_json();
  broken["version"] = 99;
  CHECK_THROWS_AS(TrainedModel::from_json(broken), Error);
  CHECK_THROWS_AS(TrainedModel::from_json(Json{{"format", "rbc-model"}}), Error);
}

TEST_CASE("prediction selects columns by name") {
  const auto ds = synth::blobs({40, 40}, 3, 1.0, 2, 61);
  const auto m = fit(preset(Family::random_forest, Preset::library_default), ds);
  const std::vector<std::size_t> reorder{2, 0, 1};
  CHECK(m.predict(ds.select_columns(reorder)) == m.predict(ds));
  const std::vector<std::size_t> two{0, 1};
  try {
    m.predict(ds.select_columns(two));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
  }
  CHECK_THROWS_AS(m.predict_matrix(Eigen::MatrixXd::Zero(3, 2)), Error);
}

TEST_CASE("rule baselines calibrate and are monotone") {
  const auto train = shape_data(1);
  for (Family f : {Family::circularity_rule, Family::eccentricity_rule}) {
    CAPTURE(to_string(f));
    const auto m = fit(spec(f, Json::object()), train);
    CHECK(synth::accuracy(m.predict(train), train.y) == 1.0);
    CHECK(m.feature_names() == rule_features(f));
    const auto& r = std::get<RuleModel>(m.fitted());
    const Eigen::Index j = f == Family::circularity_rule ? 1 : 2;
    const double t = f == Family::circularity_rule ? r.circularity_threshold : r.eccentricity_threshold;
    for (Eigen::Index i = 0; i < train.X.rows(); ++i) {
      if (train.y[static_cast<std::size_t>(i)] == 0) CHECK(train.X(i, j) >= t);
      else CHECK(train.X(i, j) < t);
    }
    int previous = 1;
    for (double v = 0; v <= 1.2; v += 0.01) {
      Eigen::MatrixXd row(1, 1);
      row << v;
      const int label = m.predict_matrix(row)[0];
      if (previous == 0) CHECK(label == 0);
      previous = label;
    }
  }
  const auto fixed = fit(spec(Family::circularity_rule, {{"threshold", 0.5}}), train);
  CHECK(std::get<RuleModel>(fixed.fitted()).circularity_threshold == 0.5);

  auto three = train;
  CHECK_THROWS_AS(fit(spec(Family::asakura, Json::object()), three.restrict_classes(std::vector<std::string>{"e"})),
                  Error);
}

TEST_CASE("asakura rule separates three shape groups") {
  Rng rng(4);
  Dataset ds;
  ds.classes = {"c", "e", "o"};
  ds.feature_names = {"Circularity", "Eccentricity"};
  ds.X.resize(150, 2);
  for (int i = 0; i < 150; ++i) {
    const int k = i / 50;
    ds.y.push_back(k);
    ds.X(i, 0) = k == 0 ? rng.uniform(0.85, 1.0) : k == 1 ? rng.uniform(0.3, 0.7) : rng.uniform(0.4, 0.75);
    ds.X(i, 1) = k == 1 ? rng.uniform(0.2, 0.5) : rng.uniform(0.7, 1.0);
  }
  const auto m = fit(spec(Family::asakura, Json::object()), ds);
  CHECK(synth::accuracy(m.predict(ds), ds.y) == 1.0);
  const auto fixed =
      fit(spec(Family::asakura, {{"circularity_threshold", 0.8}, {"eccentricity_threshold", 0.6}}), ds);
  CHECK(fixed.predict(ds) == ds.y);
}
