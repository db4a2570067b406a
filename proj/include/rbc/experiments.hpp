#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rbc/dataset.hpp"
#include "rbc/json.hpp"
#include "rbc/metrics.hpp"
#include "rbc/models.hpp"

namespace rbc {

/// Experiment settings. JSON keys match the member names; everything except
/// "data" is optional:
///   {"data": "features.csv", "out": "results", "seed": 42, "scorer": "sds",
///    "families": ["random_forest"], "search": "randomized", "n_iter": 50,
///    "folds": 10, "train_fraction": 0.7, "preset": "tuned_sds",
///    "features": ["Circularity", ...], "projection": {"kind": "pca", "variance": 0.95},
///    "spaces": {"knn": {"k": {"int": [1, 15]}}}, "wrapper_sizes": [1, 5, 10],
///    "wrapper_spaces": {"random_forest": {"max_depth": [null, 20]}},
///    "models": [<ModelSpec JSON>], "pca_variance": 0.95}
struct ExperimentConfig {
  std::string data;                      // as written in the config
  std::filesystem::path data_path;       // resolved against the config's directory
  std::string out;
  std::uint64_t seed = 42;
  Scorer scorer = Scorer::sds;
  std::vector<Family> families;          // empty: the experiment's default list
  std::string search = "randomized";     // or "grid"
  int n_iter = 50;
  int folds = 10;
  double train_fraction = 0.7;
  Preset preset = Preset::paper_sds;     // models used by exp2 and exp3
  std::vector<std::string> features;     // empty: every column
  Json projection;                       // null, {"kind": "pca", "variance": v} or {"kind": "lda"}
  Json spaces = Json::object();          // family name -> ParamSpace JSON
  std::vector<std::size_t> wrapper_sizes;
  Json wrapper_spaces = Json::object();
  std::vector<ModelSpec> models;         // exp3 explicit models
  double pca_variance = 0.95;

  /// Normalised form; its hash identifies the run. The output directory is
  /// left out so moving the results does not change the hash.
  Json to_json() const;
  /// Throws Error(parameter) for unknown keys or bad values and Error(io)
  /// when the data file does not exist.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Baseline 10-fold CV of each family with library defaults on every row,
/// then search on the training split and scoring of each winner on the test
/// split.
Json run_experiment1(const ExperimentConfig& cfg, const Dataset& ds);

/// Importance rankings, wrapper curves, PCA and LDA variants for each ranking
/// family, scored on the test split.
Json run_experiment2(const ExperimentConfig& cfg, const Dataset& ds);

/// Selected models against the Asakura rule on three classes and against the
/// circularity and eccentricity rules on circular vs elongated.
Json run_experiment3(const ExperimentConfig& cfg, const Dataset& ds);

/// Human-readable tables for any of the three reports.
std::string render_experiment_text(const Json& report);

/// One evaluated model: confusion matrix plus the four metrics.
Json evaluation_json(const std::string& name, const ConfusionMatrix& cm);

}  // namespace rbc
