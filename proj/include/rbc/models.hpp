#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rbc/dataset.hpp"
#include "rbc/json.hpp"
#include "rbc/mlp.hpp"
#include "rbc/svm.hpp"
#include "rbc/tree.hpp"

namespace rbc {

enum class Family {
  svm_rbf,
  cart,
  random_forest,
  extra_trees,
  gradient_boosting,
  knn,
  mlp,
  asakura,
  circularity_rule,
  eccentricity_rule,
};

std::string to_string(Family f);
Family parse_family(const std::string& s);
/// The seven learned classifiers, in report order: SVM, DT, RF, ET, GB, kNN, MLP.
const std::vector<Family>& learned_families();
/// Short report label such as "RF".
std::string short_name(Family f);
bool is_rule(Family f);

/// Hyperparameters use semantic names. Unknown names are rejected.
///   svm_rbf:           C, gamma (number or "scale"), tol, max_iter
///   cart:              max_depth (null = unlimited), min_samples_leaf, min_samples_split,
///                      max_features ("all", "sqrt", "log2", count or fraction)
///   random_forest,
///   extra_trees:       tree_count, bootstrap, plus the cart fields
///   gradient_boosting: stage_count, learning_rate, max_depth, subsample,
///                      min_child_weight, max_delta_step, lambda
///   knn:               k, weights ("uniform" or "distance"), p
///   mlp:               hidden, activation, learning_rate, momentum, epochs,
///                      batch_size, alpha, tol, patience
///   asakura:           circularity_threshold, eccentricity_threshold, grid
///   circularity_rule,
///   eccentricity_rule: threshold, grid
/// Rule thresholds left null are calibrated on the training data.
struct ModelSpec {
  Family family = Family::cart;
  Json params = Json::object();
  std::uint64_t seed = 0;

  Json to_json() const;
  static ModelSpec from_json(const Json& j);
  bool operator==(const ModelSpec& o) const;
};

enum class Preset { library_default, paper_sds, paper_f };
std::string to_string(Preset p);
Preset parse_preset(const std::string& s);

/// Version tag of the preset tables below; bumped whenever a value changes.
inline constexpr const char* kPresetVersion = "rbc-presets/1";

ModelSpec preset(Family f, Preset p, std::uint64_t seed = 0);

/// Spec with every hyperparameter present. Throws Error(parameter) on an
/// unknown name, wrong type or out-of-range value.
ModelSpec resolve(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Fitted parameter types
// ---------------------------------------------------------------------------

/// CART, random forest and extra trees. Prediction is a majority vote of the
/// trees' leaf classes, ties to the lower class index.
struct TreeEnsemble {
  int n_classes = 0;
  std::vector<Tree> trees;
  std::vector<double> importances;  // normalised mean impurity decrease

  int predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct GbOptions {
  int stage_count = 100;
  double learning_rate = 0.3;
  double subsample = 1;
  BoostTreeParams tree;
};

/// Multiclass boosting on the softmax log-loss with one regression tree per
/// class and stage. A stage whose shrunken step would raise the training
/// loss is retried at half the step (up to 30 times) and dropped otherwise.
struct GbModel {
  int n_classes = 0;
  std::vector<std::vector<Tree>> stages;  // stages[s][k]
  std::vector<double> steps;              // effective shrinkage per stage
  std::vector<double> train_loss;         // loss before stage 0, then after each stage
  std::vector<double> importances;        // normalised total gain

  Eigen::MatrixXd raw_scores(const Eigen::MatrixXd& X) const;
  int predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

GbModel train_gb(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes, const GbOptions& opt,
                 std::uint64_t seed);

/// Brute-force k nearest neighbours under the Minkowski p-distance.
/// Neighbour ties go to the lower training index, vote ties to the lower class.
/// With distance weighting, exact matches (distance 0) outvote everything else.
struct KnnModel {
  int n_classes = 0;
  int k = 5;
  bool distance_weights = false;
  double p = 2;
  Eigen::MatrixXd X;
  std::vector<int> y;

  double distance(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
  std::vector<std::size_t> neighbours(const Eigen::Ref<const Eigen::RowVectorXd>& q) const;
  int predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& q) const;
};

/// Threshold rules on raw (unscaled) shape features.
///   circularity_rule:  Circularity >= t -> normal, else the other class
///   eccentricity_rule: Eccentricity >= t -> normal, else the other class
///   asakura:           Eccentricity < te -> e; else Circularity >= tc -> c; else o
struct RuleModel {
  Family family = Family::circularity_rule;
  double circularity_threshold = 0;
  double eccentricity_threshold = 0;
  int normal = 0;     // class index of "c"
  int elongated = 1;  // class index of "e" (or the single deformed class)
  int other = -1;     // class index of "o", -1 when absent

  /// Row holds the rule's input columns in feature_names order.
  int predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

/// Input columns each rule reads.
std::vector<std::string> rule_features(Family f);

using FittedModel = std::variant<TreeEnsemble, GbModel, SvmModel, KnnModel, Mlp, RuleModel>;

class TrainedModel {
public:
  TrainedModel(ModelSpec spec, std::vector<std::string> classes, std::vector<std::string> feature_names,
               std::optional<ScalerStats> scaler, FittedModel fitted);

  const ModelSpec& spec() const { return spec_; }
  Family family() const { return spec_.family; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::optional<ScalerStats>& scaler() const { return scaler_; }
  const FittedModel& fitted() const { return fitted_; }

  /// Picks the model's columns from `ds` by name; throws Error(data) when one
  /// is missing. Returned labels index classes().
  std::vector<int> predict(const Dataset& ds) const;
  /// Raw (unscaled) rows whose columns follow feature_names().
  std::vector<int> predict_matrix(const Eigen::MatrixXd& X) const;

  /// Per-feature importance for tree families, aligned with feature_names().
  std::vector<double> feature_importances() const;

  Json to_json() const;
  static TrainedModel from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

private:
  ModelSpec spec_;
  std::vector<std::string> classes_;
  std::vector<std::string> feature_names_;
  std::optional<ScalerStats> scaler_;
  FittedModel fitted_;
};

inline constexpr int kModelFormatVersion = 1;

/// Learned families standardise the training columns first and keep the
/// statistics for prediction; rule families read raw values.
TrainedModel fit(const ModelSpec& spec, const Dataset& train);

}  // namespace rbc
