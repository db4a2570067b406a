#include <fstream>

#include "rbc/error.hpp"
#include "rbc/models.hpp"

namespace rbc {

namespace {

Json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Json matrix_json(const Eigen::MatrixXd& M) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(M.cols()));
    for (Eigen::Index c = 0; c < M.cols(); ++c) row[static_cast<std::size_t>(c)] = M(r, c);
    rows.push_back(row);
  }
  return Json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", rows}};
}

Eigen::MatrixXd json_matrix(const Json& j) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<std::vector<double>>>();
  if (static_cast<Eigen::Index>(data.size()) != r) throw_data("model JSON: matrix row count mismatch");
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(data[static_cast<std::size_t>(i)].size()) != c)
      throw_data("model JSON: matrix column count mismatch");
    for (Eigen::Index k = 0; k < c; ++k) M(i, k) = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return M;
}

Json trees_json(const std::vector<Tree>& trees) {
  Json a = Json::array();
  for (const auto& t : trees) a.push_back(t.to_json());
  return a;
}

std::vector<Tree> json_trees(const Json& j) {
  std::vector<Tree> out;
  for (const auto& t : j) out.push_back(Tree::from_json(t));
  return out;
}

Json fitted_json(const FittedModel& f) {
  return std::visit(
      [](const auto& m) -> Json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TreeEnsemble>) {
          return {{"kind", "tree_ensemble"}, {"n_classes", m.n_classes}, {"importances", m.importances},
                  {"trees", trees_json(m.trees)}};
        } else if constexpr (std::is_same_v<T, GbModel>) {
          Json stages = Json::array();
          for (const auto& s : m.stages) stages.push_back(trees_json(s));
          return {{"kind", "boosting"},          {"n_classes", m.n_classes},     {"steps", m.steps},
                  {"train_loss", m.train_loss},  {"importances", m.importances}, {"stages", stages}};
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          Json j = m.to_json();
          j["kind"] = "svm";
          return j;
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return {{"kind", "knn"}, {"n_classes", m.n_classes}, {"k", m.k}, {"distance_weights", m.distance_weights},
                  {"p", m.p},      {"X", matrix_json(m.X)},    {"y", m.y}};
        } else if constexpr (std::is_same_v<T, Mlp>) {
          Json j = m.to_json();
          j["kind"] = "mlp";
          j["loss_curve"] = m.loss_curve;
          return j;
        } else {
          return {{"kind", "rule"},
                  {"family", to_string(m.family)},
                  {"circularity_threshold", m.circularity_threshold},
                  {"eccentricity_threshold", m.eccentricity_threshold},
                  {"normal", m.normal},
                  {"elongated", m.elongated},
                  {"other", m.other}};
        }
      },
      f);
}

FittedModel json_fitted(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "tree_ensemble") {
    TreeEnsemble e;
    e.n_classes = j.at("n_classes").get<int>();
    e.importances = j.at("importances").get<std::vector<double>>();
    e.trees = json_trees(j.at("trees"));
    return e;
  }
  if (kind == "boosting") {
    GbModel g;
    g.n_classes = j.at("n_classes").get<int>();
    g.steps = j.at("steps").get<std::vector<double>>();
    g.train_loss = j.at("train_loss").get<std::vector<double>>();
    g.importances = j.at("importances").get<std::vector<double>>();
    for (const auto& s : j.at("stages")) g.stages.push_back(json_trees(s));
    if (g.stages.size() != g.steps.size()) throw_data("model JSON: stage and step counts differ");
    return g;
  }
  if (kind == "svm") return SvmModel::from_json(j);
  if (kind == "knn") {
    KnnModel k;
    k.n_classes = j.at("n_classes").get<int>();
    k.k = j.at("k").get<int>();
    k.distance_weights = j.at("distance_weights").get<bool>();
    k.p = j.at("p").get<double>();
    k.X = json_matrix(j.at("X"));
    k.y = j.at("y").get<std::vector<int>>();
    if (static_cast<Eigen::Index>(k.y.size()) != k.X.rows()) throw_data("model JSON: kNN label count mismatch");
    return k;
  }
  if (kind == "mlp") {
    Mlp m = Mlp::from_json(j);
    if (j.contains("loss_curve")) m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
    return m;
  }
  if (kind == "rule") {
    RuleModel r;
    r.family = parse_family(j.at("family").get<std::string>());
    r.circularity_threshold = j.at("circularity_threshold").get<double>();
    r.eccentricity_threshold = j.at("eccentricity_threshold").get<double>();
    r.normal = j.at("normal").get<int>();
    r.elongated = j.at("elongated").get<int>();
    r.other = j.at("other").get<int>();
    return r;
  }
  throw_data("model JSON: unknown fitted kind '" + kind + "'");
}

}  // namespace

Json TrainedModel::to_json() const {
  Json j;
  j["format"] = "rbc-model";
  j["version"] = kModelFormatVersion;
  j["spec"] = spec_.to_json();
  j["classes"] = classes_;
  j["feature_names"] = feature_names_;
  if (scaler_) {
    j["scaler"] = {{"mean", vec_json(scaler_->mean)},
                   {"stddev", vec_json(scaler_->stddev)},
                   {"degenerate", scaler_->degenerate}};
  } else {
    j["scaler"] = nullptr;
  }
  j["fitted"] = fitted_json(fitted_);
  return j;
}

TrainedModel TrainedModel::from_json(const Json& j) {
  try {
    if (j.value("format", "") != "rbc-model") throw_data("not a model file (format tag missing)");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw_data("unsupported model format version " + std::to_string(version));
    std::optional<ScalerStats> scaler;
    if (!j.at("scaler").is_null()) {
      ScalerStats s;
      s.mean = json_vec(j.at("scaler").at("mean"));
      s.stddev = json_vec(j.at("scaler").at("stddev"));
      s.degenerate = j.at("scaler").at("degenerate").get<std::vector<bool>>();
      scaler = std::move(s);
    }
    TrainedModel m(ModelSpec::from_json(j.at("spec")), j.at("classes").get<std::vector<std::string>>(),
                   j.at("feature_names").get<std::vector<std::string>>(), std::move(scaler),
                   json_fitted(j.at("fitted")));
    if (m.scaler_ && static_cast<std::size_t>(m.scaler_->mean.size()) != m.feature_names_.size())
      throw_data("model JSON: scaler width does not match the feature list");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed model JSON: ") + e.what());
  }
}

void TrainedModel::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

TrainedModel TrainedModel::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

}  // namespace rbc
