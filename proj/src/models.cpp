#include "rbc/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rbc/error.hpp"
#include "rbc/metrics.hpp"
#include "rbc/parallel.hpp"
#include "rbc/random.hpp"

namespace rbc {

// ---------------------------------------------------------------------------
// Families and specs
// ---------------------------------------------------------------------------

namespace {

struct FamilyInfo {
  Family family;
  const char* name;
  const char* short_name;
};

constexpr FamilyInfo kFamilies[] = {
    {Family::svm_rbf, "svm_rbf", "SVM"},
    {Family::cart, "cart", "DT"},
    {Family::random_forest, "random_forest", "RF"},
    {Family::extra_trees, "extra_trees", "ET"},
    {Family::gradient_boosting, "gradient_boosting", "GB"},
    {Family::knn, "knn", "kNN"},
    {Family::mlp, "mlp", "MLP"},
    {Family::asakura, "asakura", "Asakura"},
    {Family::circularity_rule, "circularity_rule", "CSF rule"},
    {Family::eccentricity_rule, "eccentricity_rule", "ESF rule"},
};

const FamilyInfo& info(Family f) {
  for (const auto& i : kFamilies)
    if (i.family == f) return i;
  throw_parameter("unknown model family");
}

Json library_defaults(Family f) {
  const Json tree = {{"max_depth", nullptr}, {"min_samples_leaf", 1}, {"min_samples_split", 2}};
  switch (f) {
    case Family::svm_rbf: return {{"C", 1.0}, {"gamma", "scale"}, {"tol", 1e-3}, {"max_iter", 0}};
    case Family::cart: {
      Json j = tree;
      j["max_features"] = "all";
      return j;
    }
    case Family::random_forest:
    case Family::extra_trees: {
      Json j = {{"tree_count", 100}, {"bootstrap", f == Family::random_forest}};
      for (auto it = tree.begin(); it != tree.end(); ++it) j[it.key()] = it.value();
      j["max_features"] = "sqrt";
      return j;
    }
    case Family::gradient_boosting:
      return {{"stage_count", 100}, {"learning_rate", 0.3}, {"max_depth", 6},          {"subsample", 1.0},
              {"min_child_weight", 1.0}, {"max_delta_step", 0.0}, {"lambda", 1.0}};
    case Family::knn: return {{"k", 5}, {"weights", "uniform"}, {"p", 2.0}};
    case Family::mlp:
      return {{"hidden", {100}},   {"activation", "relu"}, {"learning_rate", 0.01}, {"momentum", 0.9},
              {"epochs", 500},     {"batch_size", 32},     {"alpha", 1e-4},         {"tol", 1e-4},
              {"patience", 10}};
    case Family::asakura:
      return {{"circularity_threshold", nullptr}, {"eccentricity_threshold", nullptr}, {"grid", 64}};
    case Family::circularity_rule:
    case Family::eccentricity_rule: return {{"threshold", nullptr}, {"grid", 64}};
  }
  return Json::object();
}

const Json& param(const Json& p, const char* key) {
  const auto it = p.find(key);
  if (it == p.end()) throw_parameter(std::string("missing hyperparameter '") + key + "'");
  return *it;
}

double get_num(const Json& p, const char* key) {
  const auto& v = param(p, key);
  if (!v.is_number()) throw_parameter(std::string("hyperparameter '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw_parameter(std::string("hyperparameter '") + key + "' must be finite");
  return d;
}

long long get_int(const Json& p, const char* key) {
  const auto& v = param(p, key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 1e15) return static_cast<long long>(d);
  }
  throw_parameter(std::string("hyperparameter '") + key + "' must be an integer");
}

bool get_bool(const Json& p, const char* key) {
  const auto& v = param(p, key);
  if (!v.is_boolean()) throw_parameter(std::string("hyperparameter '") + key + "' must be true or false");
  return v.get<bool>();
}

std::string get_str(const Json& p, const char* key) {
  const auto& v = param(p, key);
  if (!v.is_string()) throw_parameter(std::string("hyperparameter '") + key + "' must be a string");
  return v.get<std::string>();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw_parameter(what);
}

int max_features_count(const Json& v, int d) {
  if (v.is_null()) return d;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "all") return d;
    if (s == "sqrt" || s == "auto") return std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));
    if (s == "log2") return std::max(1, static_cast<int>(std::log2(static_cast<double>(d))));
    throw_parameter("max_features must be all, sqrt, log2, a count or a fraction");
  }
  if (v.is_number_integer()) {
    const auto n = v.get<long long>();
    require(n >= 1, "max_features count must be >= 1");
    return static_cast<int>(std::min<long long>(n, d));
  }
  if (v.is_number_float()) {
    const double f = v.get<double>();
    require(f > 0 && f <= 1, "max_features fraction must be in (0, 1]");
    return std::max(1, static_cast<int>(f * d));
  }
  throw_parameter("max_features has an unsupported type");
}

TreeParams tree_params(const Json& p, int d) {
  TreeParams t;
  const auto& md = param(p, "max_depth");
  if (md.is_null()) t.max_depth = -1;
  else {
    const auto v = get_int(p, "max_depth");
    require(v >= 1, "max_depth must be >= 1 or null");
    t.max_depth = static_cast<int>(v);
  }
  t.min_samples_leaf = static_cast<int>(get_int(p, "min_samples_leaf"));
  t.min_samples_split = static_cast<int>(get_int(p, "min_samples_split"));
  require(t.min_samples_leaf >= 1, "min_samples_leaf must be >= 1");
  require(t.min_samples_split >= 2, "min_samples_split must be >= 2");
  t.max_features = max_features_count(param(p, "max_features"), std::max(d, 1));
  return t;
}

GbOptions gb_options(const Json& p) {
  GbOptions o;
  o.stage_count = static_cast<int>(get_int(p, "stage_count"));
  o.learning_rate = get_num(p, "learning_rate");
  o.subsample = get_num(p, "subsample");
  o.tree.max_depth = static_cast<int>(get_int(p, "max_depth"));
  o.tree.min_child_weight = get_num(p, "min_child_weight");
  o.tree.max_delta_step = get_num(p, "max_delta_step");
  o.tree.lambda = get_num(p, "lambda");
  require(o.stage_count >= 1, "stage_count must be >= 1");
  require(o.learning_rate > 0 && o.learning_rate <= 1, "learning_rate must be in (0, 1]");
  require(o.subsample > 0 && o.subsample <= 1, "subsample must be in (0, 1]");
  require(o.tree.max_depth >= 1, "max_depth must be >= 1");
  require(o.tree.min_child_weight >= 0, "min_child_weight must be >= 0");
  require(o.tree.max_delta_step >= 0, "max_delta_step must be >= 0");
  require(o.tree.lambda >= 0, "lambda must be >= 0");
  return o;
}

MlpOptions mlp_options(const Json& p) {
  MlpOptions o;
  const auto& h = param(p, "hidden");
  require(h.is_array(), "hidden must be a list of layer widths");
  o.hidden.clear();
  for (const auto& w : h) {
    require(w.is_number_integer() && w.get<long long>() >= 1, "hidden layer widths must be integers >= 1");
    o.hidden.push_back(w.get<int>());
  }
  o.activation = parse_activation(get_str(p, "activation"));
  o.learning_rate = get_num(p, "learning_rate");
  o.momentum = get_num(p, "momentum");
  o.epochs = static_cast<int>(get_int(p, "epochs"));
  o.batch_size = static_cast<int>(get_int(p, "batch_size"));
  o.alpha = get_num(p, "alpha");
  o.tol = get_num(p, "tol");
  o.patience = static_cast<int>(get_int(p, "patience"));
  require(o.learning_rate > 0, "learning_rate must be > 0");
  require(o.momentum >= 0 && o.momentum < 1, "momentum must be in [0, 1)");
  require(o.epochs >= 1, "epochs must be >= 1");
  require(o.batch_size >= 1, "batch_size must be >= 1");
  require(o.alpha >= 0, "alpha must be >= 0");
  require(o.patience >= 0, "patience must be >= 0");
  return o;
}

void validate_params(Family f, const Json& p) {
  switch (f) {
    case Family::svm_rbf: {
      require(get_num(p, "C") > 0, "C must be > 0");
      const auto& g = param(p, "gamma");
      if (g.is_string()) require(g.get<std::string>() == "scale", "gamma must be a positive number or \"scale\"");
      else require(get_num(p, "gamma") > 0, "gamma must be > 0");
      require(get_num(p, "tol") > 0, "tol must be > 0");
      require(get_int(p, "max_iter") >= 0, "max_iter must be >= 0");
      break;
    }
    case Family::cart: tree_params(p, 1); break;
    case Family::random_forest:
    case Family::extra_trees:
      tree_params(p, 1);
      require(get_int(p, "tree_count") >= 1, "tree_count must be >= 1");
      get_bool(p, "bootstrap");
      break;
    case Family::gradient_boosting: gb_options(p); break;
    case Family::knn: {
      require(get_int(p, "k") >= 1, "k must be >= 1");
      const auto w = get_str(p, "weights");
      require(w == "uniform" || w == "distance", "weights must be uniform or distance");
      require(get_num(p, "p") >= 1, "p must be >= 1");
      break;
    }
    case Family::mlp: mlp_options(p); break;
    case Family::asakura:
      for (const char* k : {"circularity_threshold", "eccentricity_threshold"})
        if (!param(p, k).is_null()) get_num(p, k);
      require(get_int(p, "grid") >= 2, "grid must be >= 2");
      break;
    case Family::circularity_rule:
    case Family::eccentricity_rule:
      if (!param(p, "threshold").is_null()) get_num(p, "threshold");
      require(get_int(p, "grid") >= 2, "grid must be >= 2");
      break;
  }
}

}  // namespace

std::string to_string(Family f) { return info(f).name; }

Family parse_family(const std::string& s) {
  for (const auto& i : kFamilies)
    if (s == i.name || s == i.short_name) return i.family;
  throw_parameter("unknown model family '" + s + "'");
}

std::string short_name(Family f) { return info(f).short_name; }

const std::vector<Family>& learned_families() {
  static const std::vector<Family> v = {Family::svm_rbf,           Family::cart, Family::random_forest,
                                        Family::extra_trees,       Family::gradient_boosting,
                                        Family::knn,               Family::mlp};
  return v;
}

bool is_rule(Family f) {
  return f == Family::asakura || f == Family::circularity_rule || f == Family::eccentricity_rule;
}

Json ModelSpec::to_json() const { return Json{{"family", rbc::to_string(family)}, {"params", params}, {"seed", seed}}; }

ModelSpec ModelSpec::from_json(const Json& j) {
  ModelSpec s;
  try {
    s.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("params")) s.params = j.at("params");
    if (!s.params.is_object()) throw_parameter("model spec params must be an object");
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw_parameter(std::string("malformed model spec: ") + e.what());
  }
  return s;
}

bool ModelSpec::operator==(const ModelSpec& o) const {
  return family == o.family && params == o.params && seed == o.seed;
}

std::string to_string(Preset p) {
  switch (p) {
    case Preset::library_default: return "default";
    case Preset::paper_sds: return "tuned_sds";
    case Preset::paper_f: return "tuned_f";
  }
  return "?";
}

Preset parse_preset(const std::string& s) {
  if (s == "default") return Preset::library_default;
  if (s == "tuned_sds") return Preset::paper_sds;
  if (s == "tuned_f") return Preset::paper_f;
  throw_parameter("unknown preset '" + s + "' (expected default, tuned_sds or tuned_f)");
}

ModelSpec preset(Family f, Preset p, std::uint64_t seed) {
  ModelSpec s{f, Json::object(), seed};
  if (p != Preset::library_default) {
    const bool sds = p == Preset::paper_sds;
    switch (f) {
      case Family::svm_rbf: s.params = {{"C", 10.0}, {"gamma", 0.01}}; break;
      case Family::cart:
        s.params = {{"max_depth", nullptr}, {"max_features", "all"}, {"min_samples_leaf", 10}, {"min_samples_split", 10}};
        break;
      case Family::random_forest:
        s.params = {{"tree_count", 300}, {"min_samples_leaf", 2}, {"min_samples_split", 2},
                    {"max_depth", nullptr}, {"max_features", "sqrt"}, {"bootstrap", true}};
        break;
      case Family::extra_trees:
        s.params = {{"tree_count", 60}, {"max_depth", nullptr}, {"max_features", "sqrt"},
                    {"min_samples_leaf", 1}, {"min_samples_split", 10}, {"bootstrap", true}};
        break;
      case Family::gradient_boosting:
        s.params = {{"subsample", 1.0}, {"min_child_weight", 1.0}, {"max_depth", 10},
                    {"max_delta_step", sds ? 10.0 : 20.0}};
        break;
      case Family::knn: s.params = {{"k", sds ? 10 : 9}, {"weights", "distance"}, {"p", 1.0}}; break;
      case Family::mlp: s.params = {{"hidden", {10, 3}}, {"activation", "identity"}}; break;
      default: break;
    }
  }
  return resolve(s);
}

ModelSpec resolve(const ModelSpec& spec) {
  if (!spec.params.is_object()) throw_parameter("model spec params must be an object");
  ModelSpec out = spec;
  out.params = library_defaults(spec.family);
  for (auto it = spec.params.begin(); it != spec.params.end(); ++it) {
    if (!out.params.contains(it.key()))
      throw_parameter("unknown hyperparameter '" + it.key() + "' for " + to_string(spec.family));
    out.params[it.key()] = it.value();
  }
  validate_params(spec.family, out.params);
  return out;
}

// ---------------------------------------------------------------------------
// Tree ensembles
// ---------------------------------------------------------------------------

int TreeEnsemble::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::vector<double> votes(static_cast<std::size_t>(n_classes), 0.0);
  for (const auto& t : trees) votes[static_cast<std::size_t>(argmax_lowest(t.leaf_value(x)))] += 1;
  return argmax_lowest(votes);
}

namespace {

void normalise(std::vector<double>& v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0)
    for (auto& x : v) x /= s;
}

TreeEnsemble train_forest(const Eigen::MatrixXd& Z, std::span<const int> y, int k, const TreeParams& tp,
                          int tree_count, bool bootstrap, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(Z.rows());
  Rng master(seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(tree_count));
  for (auto& s : seeds) s = master.next();
  TreeEnsemble e;
  e.n_classes = k;
  e.trees.resize(seeds.size());
  std::vector<std::vector<double>> imp(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t t) {
    Rng rng(seeds[t]);
    std::vector<std::size_t> rows(n);
    if (bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    e.trees[t] = build_classification_tree(Z, y, k, rows, tp, rng, &imp[t]);
    normalise(imp[t]);
  });
  e.importances.assign(static_cast<std::size_t>(Z.cols()), 0.0);
  for (const auto& v : imp)
    for (std::size_t j = 0; j < v.size(); ++j) e.importances[j] += v[j] / static_cast<double>(imp.size());
  normalise(e.importances);
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gradient boosting
// ---------------------------------------------------------------------------

namespace {

double softmax_loss(const Eigen::MatrixXd& F, std::span<const int> y) {
  double s = 0;
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    const double m = F.row(i).maxCoeff();
    const double lse = m + std::log((F.row(i).array() - m).exp().sum());
    s += lse - F(i, y[static_cast<std::size_t>(i)]);
  }
  return s / static_cast<double>(F.rows());
}

}  // namespace

Eigen::MatrixXd GbModel::raw_scores(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(X.rows(), n_classes);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::RowVectorXd x = X.row(i);
    for (std::size_t s = 0; s < stages.size(); ++s)
      for (std::size_t k = 0; k < stages[s].size(); ++k)
        F(i, static_cast<Eigen::Index>(k)) += steps[s] * stages[s][k].leaf_value(x)[0];
  }
  return F;
}

int GbModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::vector<double> f(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t s = 0; s < stages.size(); ++s)
    for (std::size_t k = 0; k < stages[s].size(); ++k) f[k] += steps[s] * stages[s][k].leaf_value(x)[0];
  return argmax_lowest(f);
}

GbModel train_gb(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes, const GbOptions& opt,
                 std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n == 0 || y.size() != n) throw_parameter("boosting: label count does not match rows");
  const auto K = static_cast<std::size_t>(n_classes);
  Rng rng(seed);
  GbModel m;
  m.n_classes = n_classes;
  m.importances.assign(static_cast<std::size_t>(X.cols()), 0.0);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(X.rows(), n_classes);
  double loss = softmax_loss(F, y);
  m.train_loss.push_back(loss);

  std::vector<std::vector<double>> g(K, std::vector<double>(n)), h(K, std::vector<double>(n));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto n_sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.subsample * n)));

  for (int s = 0; s < opt.stage_count; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double mx = F.row(r).maxCoeff();
      const Eigen::RowVectorXd e = (F.row(r).array() - mx).exp().matrix();
      const double z = e.sum();
      for (std::size_t k = 0; k < K; ++k) {
        const double p = e[static_cast<Eigen::Index>(k)] / z;
        g[k][i] = p - (y[i] == static_cast<int>(k) ? 1.0 : 0.0);
        h[k][i] = std::max(2.0 * p * (1.0 - p), 1e-16);
      }
    }
    std::vector<std::size_t> rows = all;
    if (n_sub < n) {
      rng.shuffle(std::span<std::size_t>(rows));
      rows.resize(n_sub);
      std::sort(rows.begin(), rows.end());
    }
    std::vector<Tree> trees(K);
    std::vector<std::vector<double>> gains(K);
    parallel_for(K, [&](std::size_t k) { trees[k] = build_boost_tree(X, g[k], h[k], rows, opt.tree, &gains[k]); });

    Eigen::MatrixXd delta(X.rows(), n_classes);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const Eigen::RowVectorXd x = X.row(i);
      for (std::size_t k = 0; k < K; ++k) delta(i, static_cast<Eigen::Index>(k)) = trees[k].leaf_value(x)[0];
    }
    double step = opt.learning_rate;
    double next = softmax_loss(F + step * delta, y);
    for (int tries = 0; next > loss && tries < 30; ++tries) {
      step *= 0.5;
      next = softmax_loss(F + step * delta, y);
    }
    if (next > loss) {
      step = 0;
      next = loss;
    }
    F += step * delta;
    loss = next;
    m.stages.push_back(std::move(trees));
    m.steps.push_back(step);
    m.train_loss.push_back(loss);
    if (step > 0)
      for (const auto& gk : gains)
        for (std::size_t j = 0; j < gk.size(); ++j) m.importances[j] += gk[j];
  }
  normalise(m.importances);
  return m;
}

// ---------------------------------------------------------------------------
// k nearest neighbours
// ---------------------------------------------------------------------------

double KnnModel::distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                          const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  if (p == 1) return (a - b).cwiseAbs().sum();
  if (p == 2) return (a - b).norm();
  return std::pow((a - b).cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

std::vector<std::size_t> KnnModel::neighbours(const Eigen::Ref<const Eigen::RowVectorXd>& q) const {
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = distance(X.row(static_cast<Eigen::Index>(i)), q);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
  idx.resize(kk);
  return idx;
}

int KnnModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& q) const {
  const auto nb = neighbours(q);
  std::vector<double> votes(static_cast<std::size_t>(n_classes), 0.0);
  if (distance_weights) {
    bool exact = false;
    for (auto i : nb)
      if (distance(X.row(static_cast<Eigen::Index>(i)), q) == 0) exact = true;
    for (auto i : nb) {
      const double dist = distance(X.row(static_cast<Eigen::Index>(i)), q);
      const double w = exact ? (dist == 0 ? 1.0 : 0.0) : 1.0 / dist;
      votes[static_cast<std::size_t>(y[i])] += w;
    }
  } else {
    for (auto i : nb) votes[static_cast<std::size_t>(y[i])] += 1;
  }
  return argmax_lowest(votes);
}

// ---------------------------------------------------------------------------
// Rule baselines
// ---------------------------------------------------------------------------

std::vector<std::string> rule_features(Family f) {
  switch (f) {
    case Family::circularity_rule: return {"Circularity"};
    case Family::eccentricity_rule: return {"Eccentricity"};
    case Family::asakura: return {"Circularity", "Eccentricity"};
    default: return {};
  }
}

int RuleModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  switch (family) {
    case Family::circularity_rule: return x[0] >= circularity_threshold ? normal : elongated;
    case Family::eccentricity_rule: return x[0] >= eccentricity_threshold ? normal : elongated;
    case Family::asakura:
      if (x[1] < eccentricity_threshold) return elongated;
      if (x[0] >= circularity_threshold) return normal;
      return other >= 0 ? other : elongated;
    default: throw_parameter("not a rule family");
  }
}

namespace {

std::vector<double> distinct(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Sorted distinct values thinned to `grid` quantiles, plus one value above
// the maximum so "nothing passes" is also a candidate.
std::vector<double> threshold_grid(const std::vector<double>& v, int grid) {
  std::vector<double> out;
  if (static_cast<int>(v.size()) <= grid) {
    out = v;
  } else {
    for (int i = 0; i < grid; ++i) {
      const auto pos = static_cast<std::size_t>(std::llround(static_cast<double>(i) * (v.size() - 1) / (grid - 1)));
      if (out.empty() || out.back() != v[pos]) out.push_back(v[pos]);
    }
  }
  out.push_back(v.back() + std::max(1.0, std::abs(v.back())));
  return out;
}

// Every distinct value strictly between the grid neighbours of `t`.
std::vector<double> refinement(const std::vector<double>& values, const std::vector<double>& grid, double t) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), t);
  const double lo = it == grid.begin() ? -std::numeric_limits<double>::infinity() : *(it - 1);
  const double hi = it + 1 >= grid.end() ? std::numeric_limits<double>::infinity() : *(it + 1);
  std::vector<double> out;
  for (double v : values)
    if (v > lo && v < hi && v != t) out.push_back(v);
  return out;
}

RuleModel calibrate_rule(Family f, const Json& p, const Eigen::MatrixXd& R, std::span<const int> y,
                         const std::vector<std::string>& classes) {
  RuleModel m;
  m.family = f;
  const auto idx = [&](const char* c) {
    const auto it = std::find(classes.begin(), classes.end(), c);
    return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
  };
  m.normal = idx("c");
  if (m.normal < 0) throw_data(to_string(f) + " needs the normal class c in the training data");
  if (f == Family::asakura) {
    m.elongated = idx("e");
    m.other = idx("o");
    if (m.elongated < 0) throw_data("asakura needs class e in the training data");
  } else {
    if (classes.size() != 2) throw_data(to_string(f) + " is a two-class rule; restrict the data to two classes");
    m.elongated = 1 - m.normal;
  }
  const int grid = static_cast<int>(get_int(p, "grid"));
  const auto col = [&](Eigen::Index j) {
    return std::vector<double>(R.col(j).data(), R.col(j).data() + R.rows());
  };

  // Lexicographic (SDS, accuracy); the first candidate wins ties.
  const auto evaluate = [&](const RuleModel& cand) {
    std::vector<int> pred(y.size());
    for (Eigen::Index i = 0; i < R.rows(); ++i) pred[static_cast<std::size_t>(i)] = cand.predict_row(R.row(i));
    const auto cm = confusion(y, pred, classes);
    return std::pair<double, double>(sds_score(cm), accuracy(cm));
  };

  // Coarse quantile grid first, then each free threshold is refined over the
  // distinct values between its grid neighbours with the other held fixed.
  const bool asakura = f == Family::asakura;
  const bool uses_c = asakura || f == Family::circularity_rule;
  const bool uses_e = asakura || f == Family::eccentricity_rule;
  const Json& fixed_c = param(p, asakura ? "circularity_threshold" : "threshold");
  const Json& fixed_e = param(p, asakura ? "eccentricity_threshold" : "threshold");
  const bool free_c = uses_c && fixed_c.is_null();
  const bool free_e = uses_e && fixed_e.is_null();
  const auto c_values = uses_c ? distinct(col(0)) : std::vector<double>{};
  const auto e_values = uses_e ? distinct(col(asakura ? 1 : 0)) : std::vector<double>{};
  const auto c_grid = !uses_c ? std::vector<double>{0.0}
                      : free_c ? threshold_grid(c_values, grid)
                               : std::vector<double>{fixed_c.get<double>()};
  const auto e_grid = !uses_e ? std::vector<double>{0.0}
                      : free_e ? threshold_grid(e_values, grid)
                               : std::vector<double>{fixed_e.get<double>()};

  std::pair<double, double> best{-1, -1};
  const auto consider = [&](double tc, double te) {
    RuleModel cand = m;
    cand.circularity_threshold = tc;
    cand.eccentricity_threshold = te;
    const auto s = evaluate(cand);
    if (s > best) {
      best = s;
      m = cand;
    }
  };
  for (double tc : c_grid)
    for (double te : e_grid) consider(tc, te);
  if (free_c) {
    const double te = m.eccentricity_threshold;
    for (double tc : refinement(c_values, c_grid, m.circularity_threshold)) consider(tc, te);
  }
  if (free_e) {
    const double tc = m.circularity_threshold;
    for (double te : refinement(e_values, e_grid, m.eccentricity_threshold)) consider(tc, te);
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainedModel
// ---------------------------------------------------------------------------

TrainedModel::TrainedModel(ModelSpec spec, std::vector<std::string> classes, std::vector<std::string> feature_names,
                           std::optional<ScalerStats> scaler, FittedModel fitted)
    : spec_(std::move(spec)),
      classes_(std::move(classes)),
      feature_names_(std::move(feature_names)),
      scaler_(std::move(scaler)),
      fitted_(std::move(fitted)) {}

std::vector<int> TrainedModel::predict(const Dataset& ds) const {
  if (ds.feature_names == feature_names_) return predict_matrix(ds.X);
  std::vector<std::size_t> cols;
  for (const auto& n : feature_names_) {
    const auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), n);
    if (it == ds.feature_names.end()) throw_data("model feature '" + n + "' is missing from the input data");
    cols.push_back(static_cast<std::size_t>(it - ds.feature_names.begin()));
  }
  return predict_matrix(ds.select_columns(cols).X);
}

std::vector<int> TrainedModel::predict_matrix(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != feature_names_.size())
    throw_data("prediction input has " + std::to_string(X.cols()) + " columns, model expects " +
               std::to_string(feature_names_.size()));
  const Eigen::MatrixXd Z = scaler_ ? standard_scale_apply(*scaler_, X) : X;
  std::vector<int> out(static_cast<std::size_t>(Z.rows()));
  if (const auto* gb = std::get_if<GbModel>(&fitted_)) {
    const auto F = gb->raw_scores(Z);
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
      std::vector<double> f(static_cast<std::size_t>(F.cols()));
      for (Eigen::Index k = 0; k < F.cols(); ++k) f[static_cast<std::size_t>(k)] = F(i, k);
      out[static_cast<std::size_t>(i)] = argmax_lowest(f);
    }
    return out;
  }
  if (const auto* mlp = std::get_if<Mlp>(&fitted_)) {
    const auto P = mlp->predict_proba(Z);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      std::vector<double> p(static_cast<std::size_t>(P.cols()));
      for (Eigen::Index k = 0; k < P.cols(); ++k) p[static_cast<std::size_t>(k)] = P(i, k);
      out[static_cast<std::size_t>(i)] = argmax_lowest(p);
    }
    return out;
  }
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TreeEnsemble> || std::is_same_v<T, SvmModel> ||
                      std::is_same_v<T, KnnModel> || std::is_same_v<T, RuleModel>) {
          parallel_for(out.size(), [&](std::size_t i) { out[i] = m.predict_row(Z.row(static_cast<Eigen::Index>(i))); });
        }
      },
      fitted_);
  return out;
}

std::vector<double> TrainedModel::feature_importances() const {
  if (const auto* e = std::get_if<TreeEnsemble>(&fitted_)) return e->importances;
  if (const auto* g = std::get_if<GbModel>(&fitted_)) return g->importances;
  return {};
}

TrainedModel fit(const ModelSpec& raw_spec, const Dataset& train) {
  const ModelSpec spec = resolve(raw_spec);
  train.validate();
  if (train.rows() < 2) throw_data("training data needs at least two rows");
  const int k = static_cast<int>(train.classes.size());
  if (k < 2) throw_data("training data needs at least two classes");
  const auto& p = spec.params;

  if (is_rule(spec.family)) {
    const auto names = rule_features(spec.family);
    const Dataset sub = train.select_features(names);
    auto m = calibrate_rule(spec.family, p, sub.X, sub.y, train.classes);
    return TrainedModel(spec, train.classes, names, std::nullopt, m);
  }

  const ScalerStats scaler = standard_scale_fit(train.X);
  const Eigen::MatrixXd Z = standard_scale_apply(scaler, train.X);
  const int d = static_cast<int>(Z.cols());
  FittedModel fitted;
  switch (spec.family) {
    case Family::svm_rbf: {
      SmoOptions o;
      o.C = get_num(p, "C");
      if (p.at("gamma").is_string()) {
        const double var = (Z.array() - Z.mean()).square().mean();
        o.gamma = var > 0 ? 1.0 / (d * var) : 1.0;
      } else {
        o.gamma = get_num(p, "gamma");
      }
      o.tol = get_num(p, "tol");
      o.max_iter = get_int(p, "max_iter");
      fitted = train_svm(Z, train.y, k, o);
      break;
    }
    case Family::cart: {
      Rng rng(spec.seed);
      TreeEnsemble e;
      e.n_classes = k;
      std::vector<std::size_t> rows(train.rows());
      std::iota(rows.begin(), rows.end(), 0);
      e.trees.push_back(build_classification_tree(Z, train.y, k, rows, tree_params(p, d), rng, &e.importances));
      normalise(e.importances);
      fitted = std::move(e);
      break;
    }
    case Family::random_forest:
    case Family::extra_trees: {
      auto tp = tree_params(p, d);
      tp.random_thresholds = spec.family == Family::extra_trees;
      fitted = train_forest(Z, train.y, k, tp, static_cast<int>(get_int(p, "tree_count")), get_bool(p, "bootstrap"),
                            spec.seed);
      break;
    }
    case Family::gradient_boosting: fitted = train_gb(Z, train.y, k, gb_options(p), spec.seed); break;
    case Family::knn: {
      KnnModel m;
      m.n_classes = k;
      m.k = static_cast<int>(get_int(p, "k"));
      if (static_cast<std::size_t>(m.k) > train.rows())
        throw_data("kNN: k = " + std::to_string(m.k) + " exceeds the " + std::to_string(train.rows()) +
                   " training rows");
      m.distance_weights = get_str(p, "weights") == "distance";
      m.p = get_num(p, "p");
      m.X = Z;
      m.y = train.y;
      fitted = std::move(m);
      break;
    }
    case Family::mlp: fitted = train_mlp(Z, train.y, k, mlp_options(p), spec.seed); break;
    default: throw_parameter("unhandled family");
  }
  return TrainedModel(spec, train.classes, train.feature_names, scaler, std::move(fitted));
}

}  // namespace rbc
