#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rbc/dataset.hpp"
#include "rbc/json.hpp"
#include "rbc/metrics.hpp"
#include "rbc/models.hpp"
#include "rbc/random.hpp"

namespace rbc {

/// Domain of one hyperparameter.
struct Domain {
  enum class Kind { choice, int_range, log_uniform };
  Kind kind = Kind::choice;
  std::vector<Json> values;  // choice
  long long lo = 0, hi = 0;  // int_range, inclusive
  double low = 0, high = 0;  // log_uniform, low > 0

  static Domain choice(std::vector<Json> v);
  static Domain int_range(long long lo, long long hi);
  static Domain log_uniform(double low, double high);

  bool finite() const { return kind != Kind::log_uniform; }
  std::size_t size() const;  // finite domains only
  Json at(std::size_t i) const;
  Json sample(Rng& rng) const;
  Json to_json() const;
  static Domain from_json(const Json& j);
};

/// Ordered hyperparameter domains. JSON form:
///   {"C": [0.1, 1, 10], "k": {"int": [1, 15]}, "gamma": {"log_uniform": [1e-3, 1e-1]}}
/// A plain array is a list of choices.
struct ParamSpace {
  std::vector<std::pair<std::string, Domain>> params;

  bool finite() const;
  /// Cartesian product size; saturates at SIZE_MAX.
  std::size_t size() const;
  /// Grid point `i`, last parameter varying fastest.
  Json point(std::size_t i) const;
  Json sample(Rng& rng) const;
  Json to_json() const;
  static ParamSpace from_json(const Json& j);
};

/// Search neighbourhoods around the tuned presets. Rule families get an
/// empty space (their thresholds are calibrated inside fit).
ParamSpace default_space(Family f);

using ScoreFn = std::function<double(const ConfusionMatrix&)>;
/// Called once per fold with the fold's training rows and the model fitted on
/// them. May run on a worker thread.
using CvObserver = std::function<void(std::size_t fold, const Dataset& fold_train, const TrainedModel& model)>;

/// Stratified k-fold scores. Every fold refits `spec` from scratch on its
/// training rows, so scaling statistics never see the validation rows.
/// A failing fold rethrows with the fold number prefixed.
std::vector<double> cross_val_score(const ModelSpec& spec, const Dataset& train, int k, const ScoreFn& score,
                                    std::uint64_t seed, const CvObserver& observer = {});
std::vector<double> cross_val_score(const ModelSpec& spec, const Dataset& train, int k, Scorer scorer,
                                    std::uint64_t seed);

/// Out-of-fold predictions from the same stratified folds, indexed like
/// train rows. Pooling them gives one confusion matrix over every row.
std::vector<int> cross_val_predict(const ModelSpec& spec, const Dataset& train, int k, std::uint64_t seed);

struct SearchOptions {
  int folds = 10;
  Scorer scorer = Scorer::f_weighted;
  ScoreFn score_fn;  // replaces `scorer` when set
  std::uint64_t seed = 0;
};

inline constexpr int kDefaultSearchIterations = 50;

struct Trial {
  ModelSpec spec;
  std::vector<double> fold_scores;
  double mean = 0;
  double stddev = 0;  // population
  std::string error;  // non-empty when the trial failed
};

struct SearchResult {
  std::string mode;  // "randomized" or "grid"
  Family family = Family::cart;
  std::string scorer;
  std::uint64_t seed = 0;
  int n_iter = 0;
  int folds = 0;
  ParamSpace space;
  std::vector<Trial> trials;
  std::size_t best_index = 0;
  ModelSpec best_spec;
  double best_score = 0;

  Json to_json() const;
};

/// Samples n_iter points from `space` (without replacement when the space is
/// finite, capped at its size) and scores each by cross-validation on
/// `train`. Fixed hyperparameters and the model seed come from `base`.
/// Highest mean wins; ties go to the earlier trial. Throws Error(data) with
/// per-trial diagnostics when every trial fails.
SearchResult randomized_search(const ParamSpace& space, const ModelSpec& base, const Dataset& train, int n_iter,
                               const SearchOptions& opt);

/// Evaluates every grid point once, in point() order.
SearchResult grid_search(const ParamSpace& space, const ModelSpec& base, const Dataset& train,
                         const SearchOptions& opt);

}  // namespace rbc
