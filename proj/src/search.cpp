#include "rbc/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "rbc/error.hpp"
#include "rbc/parallel.hpp"

namespace rbc {

// ---------------------------------------------------------------------------
// Domains and spaces
// ---------------------------------------------------------------------------

Domain Domain::choice(std::vector<Json> v) {
  if (v.empty()) throw_parameter("choice domain must not be empty");
  Domain d;
  d.kind = Kind::choice;
  d.values = std::move(v);
  return d;
}

Domain Domain::int_range(long long lo, long long hi) {
  if (hi < lo) throw_parameter("integer range must have lo <= hi");
  Domain d;
  d.kind = Kind::int_range;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Domain Domain::log_uniform(double low, double high) {
  if (!(low > 0) || !(high >= low) || !std::isfinite(high))
    throw_parameter("log-uniform range must satisfy 0 < low <= high");
  Domain d;
  d.kind = Kind::log_uniform;
  d.low = low;
  d.high = high;
  return d;
}

std::size_t Domain::size() const {
  switch (kind) {
    case Kind::choice: return values.size();
    case Kind::int_range: return static_cast<std::size_t>(hi - lo) + 1;
    case Kind::log_uniform: break;
  }
  throw_parameter("a continuous domain has no finite size");
}

Json Domain::at(std::size_t i) const {
  if (kind == Kind::choice) return values.at(i);
  if (kind == Kind::int_range) return lo + static_cast<long long>(i);
  throw_parameter("a continuous domain cannot be enumerated");
}

Json Domain::sample(Rng& rng) const {
  if (kind == Kind::log_uniform) return std::exp(rng.uniform(std::log(low), std::log(high)));
  return at(static_cast<std::size_t>(rng.below(size())));
}

Json Domain::to_json() const {
  switch (kind) {
    case Kind::choice: return Json(values);
    case Kind::int_range: return Json{{"int", {lo, hi}}};
    case Kind::log_uniform: return Json{{"log_uniform", {low, high}}};
  }
  return nullptr;
}

Domain Domain::from_json(const Json& j) {
  if (j.is_array()) return choice(std::vector<Json>(j.begin(), j.end()));
  if (j.is_object() && j.size() == 1) {
    const auto& [key, range] = *j.items().begin();
    if (range.is_array() && range.size() == 2) {
      if (key == "int" && range[0].is_number_integer() && range[1].is_number_integer())
        return int_range(range[0].get<long long>(), range[1].get<long long>());
      if (key == "log_uniform" && range[0].is_number() && range[1].is_number())
        return log_uniform(range[0].get<double>(), range[1].get<double>());
    }
  }
  if (!j.is_object()) return choice({j});
  throw_parameter("domain must be a list, {\"int\": [lo, hi]} or {\"log_uniform\": [low, high]}");
}

bool ParamSpace::finite() const {
  return std::all_of(params.begin(), params.end(), [](const auto& p) { return p.second.finite(); });
}

std::size_t ParamSpace::size() const {
  std::size_t n = 1;
  for (const auto& [name, d] : params) {
    const std::size_t s = d.size();
    if (n > std::numeric_limits<std::size_t>::max() / s) return std::numeric_limits<std::size_t>::max();
    n *= s;
  }
  return n;
}

Json ParamSpace::point(std::size_t i) const {
  Json p = Json::object();
  std::vector<Json> vals(params.size());
  for (std::size_t k = params.size(); k-- > 0;) {
    const std::size_t s = params[k].second.size();
    vals[k] = params[k].second.at(i % s);
    i /= s;
  }
  for (std::size_t k = 0; k < params.size(); ++k) p[params[k].first] = vals[k];
  return p;
}

Json ParamSpace::sample(Rng& rng) const {
  Json p = Json::object();
  for (const auto& [name, d] : params) p[name] = d.sample(rng);
  return p;
}

Json ParamSpace::to_json() const {
  Json j = Json::object();
  for (const auto& [name, d] : params) j[name] = d.to_json();
  return j;
}

ParamSpace ParamSpace::from_json(const Json& j) {
  if (!j.is_object()) throw_parameter("search space must be a JSON object of domains");
  ParamSpace s;
  for (auto it = j.begin(); it != j.end(); ++it) s.params.emplace_back(it.key(), Domain::from_json(it.value()));
  return s;
}

ParamSpace default_space(Family f) {
  ParamSpace s;
  const auto add = [&](const char* name, std::vector<Json> v) { s.params.emplace_back(name, Domain::choice(std::move(v))); };
  switch (f) {
    case Family::svm_rbf:
      add("C", {0.1, 1.0, 10.0, 100.0});
      add("gamma", {1e-3, 1e-2, 1e-1});
      break;
    case Family::cart:
      add("max_depth", {nullptr, 5, 10, 20});
      add("min_samples_leaf", {1, 2, 5, 10});
      add("min_samples_split", {2, 5, 10});
      break;
    case Family::random_forest:
    case Family::extra_trees:
      add("tree_count", {60, 100, 300});
      add("min_samples_leaf", {1, 2, 5});
      add("min_samples_split", {2, 5, 10});
      add("max_features", {"sqrt", "log2"});
      add("bootstrap", {true, false});
      break;
    case Family::gradient_boosting:
      add("stage_count", {50, 100});
      add("max_depth", {3, 6, 10});
      add("learning_rate", {0.1, 0.3});
      add("subsample", {0.8, 1.0});
      add("min_child_weight", {1.0, 3.0});
      add("max_delta_step", {0.0, 10.0, 20.0});
      break;
    case Family::knn:
      s.params.emplace_back("k", Domain::int_range(1, 15));
      add("weights", {"uniform", "distance"});
      add("p", {1.0, 2.0});
      break;
    case Family::mlp:
      add("hidden", {Json{100}, Json{10, 3}, Json{50}});
      add("activation", {"identity", "relu", "tanh", "logistic"});
      add("learning_rate", {1e-3, 1e-2});
      add("alpha", {1e-4, 1e-3});
      break;
    default: break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

std::vector<double> cross_val_score(const ModelSpec& spec, const Dataset& train, int k, const ScoreFn& score,
                                    std::uint64_t seed, const CvObserver& observer) {
  const auto folds = kfold(train.rows(), k, seed, train.y);
  std::vector<double> scores(folds.size());
  parallel_for(folds.size(), [&](std::size_t f) {
    try {
      const Dataset fit_rows = train.subset(folds[f].train);
      const Dataset valid = train.subset(folds[f].valid);
      const auto model = fit(spec, fit_rows);
      if (observer) observer(f, fit_rows, model);
      scores[f] = score(confusion(valid.y, model.predict(valid), train.classes));
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(f + 1) + ": " + e.what());
    }
  });
  return scores;
}

std::vector<double> cross_val_score(const ModelSpec& spec, const Dataset& train, int k, Scorer scorer,
                                    std::uint64_t seed) {
  return cross_val_score(
      spec, train, k, [scorer](const ConfusionMatrix& cm) { return score(cm, scorer); }, seed);
}

std::vector<int> cross_val_predict(const ModelSpec& spec, const Dataset& train, int k, std::uint64_t seed) {
  const auto folds = kfold(train.rows(), k, seed, train.y);
  std::vector<int> pred(train.rows(), -1);
  parallel_for(folds.size(), [&](std::size_t f) {
    try {
      const auto model = fit(spec, train.subset(folds[f].train));
      const auto p = model.predict(train.subset(folds[f].valid));
      for (std::size_t i = 0; i < p.size(); ++i) pred[folds[f].valid[i]] = p[i];
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(f + 1) + ": " + e.what());
    }
  });
  return pred;
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

namespace {

ModelSpec merged(const ModelSpec& base, const Json& point) {
  ModelSpec s = base;
  for (auto it = point.begin(); it != point.end(); ++it) s.params[it.key()] = it.value();
  return resolve(s);
}

SearchResult run(std::string mode, const ParamSpace& space, const ModelSpec& base, const Dataset& train,
                 const std::vector<Json>& points, const SearchOptions& opt) {
  if (opt.folds < 2) throw_parameter("search needs at least 2 folds");
  SearchResult r;
  r.mode = std::move(mode);
  r.family = base.family;
  r.scorer = opt.score_fn ? "custom" : to_string(opt.scorer);
  r.seed = opt.seed;
  r.n_iter = static_cast<int>(points.size());
  r.folds = opt.folds;
  r.space = space;
  r.trials.resize(points.size());
  for (std::size_t t = 0; t < points.size(); ++t) r.trials[t].spec = merged(base, points[t]);

  const ScoreFn score_fn =
      opt.score_fn ? opt.score_fn : ScoreFn([s = opt.scorer](const ConfusionMatrix& cm) { return score(cm, s); });
  parallel_for(r.trials.size(), [&](std::size_t t) {
    auto& trial = r.trials[t];
    try {
      trial.fold_scores = cross_val_score(trial.spec, train, opt.folds, score_fn, opt.seed);
      const double n = static_cast<double>(trial.fold_scores.size());
      trial.mean = std::accumulate(trial.fold_scores.begin(), trial.fold_scores.end(), 0.0) / n;
      double ss = 0;
      for (double v : trial.fold_scores) ss += (v - trial.mean) * (v - trial.mean);
      trial.stddev = std::sqrt(ss / n);
    } catch (const Error& e) {
      trial.error = e.what();
    }
  });

  bool found = false;
  for (std::size_t t = 0; t < r.trials.size(); ++t) {
    const auto& trial = r.trials[t];
    if (!trial.error.empty()) continue;
    if (!found || trial.mean > r.best_score) {
      found = true;
      r.best_index = t;
      r.best_score = trial.mean;
    }
  }
  if (!found) {
    std::string msg = "every search trial failed:";
    for (std::size_t t = 0; t < r.trials.size(); ++t) msg += "\n  trial " + std::to_string(t) + ": " + r.trials[t].error;
    throw_data(msg);
  }
  r.best_spec = r.trials[r.best_index].spec;
  return r;
}

}  // namespace

SearchResult randomized_search(const ParamSpace& space, const ModelSpec& base, const Dataset& train, int n_iter,
                               const SearchOptions& opt) {
  if (n_iter < 1) throw_parameter("n_iter must be >= 1");
  Rng rng(opt.seed);
  std::vector<Json> points;
  if (space.finite()) {
    const std::size_t total = space.size();
    const std::size_t want = std::min<std::size_t>(total, static_cast<std::size_t>(n_iter));
    if (total <= 1'000'000) {
      // Partial Fisher-Yates over the grid indices.
      std::vector<std::size_t> idx(total);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < want; ++i) {
        std::swap(idx[i], idx[i + static_cast<std::size_t>(rng.below(total - i))]);
        points.push_back(space.point(idx[i]));
      }
    } else {
      std::set<std::size_t> seen;
      while (points.size() < want) {
        const auto i = static_cast<std::size_t>(rng.below(total));
        if (seen.insert(i).second) points.push_back(space.point(i));
      }
    }
  } else {
    for (int i = 0; i < n_iter; ++i) points.push_back(space.sample(rng));
  }
  auto r = run("randomized", space, base, train, points, opt);
  r.n_iter = n_iter;
  return r;
}

SearchResult grid_search(const ParamSpace& space, const ModelSpec& base, const Dataset& train,
                         const SearchOptions& opt) {
  if (!space.finite()) throw_parameter("grid search needs a finite space");
  const std::size_t total = space.size();
  if (total > 100'000) throw_parameter("grid has " + std::to_string(total) + " points; use randomized search");
  std::vector<Json> points;
  for (std::size_t i = 0; i < total; ++i) points.push_back(space.point(i));
  return run("grid", space, base, train, points, opt);
}

Json SearchResult::to_json() const {
  Json trials_json = Json::array();
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const auto& tr = trials[t];
    Json j{{"index", t}, {"params", tr.spec.params}};
    if (tr.error.empty()) {
      j["fold_scores"] = tr.fold_scores;
      j["mean"] = tr.mean;
      j["std"] = tr.stddev;
    } else {
      j["error"] = tr.error;
    }
    trials_json.push_back(j);
  }
  return Json{{"mode", mode},
              {"family", rbc::to_string(family)},
              {"scorer", scorer},
              {"seed", seed},
              {"n_iter", n_iter},
              {"folds", folds},
              {"preset_version", kPresetVersion},
              {"space", space.to_json()},
              {"best_index", best_index},
              {"best_score", best_score},
              {"best_spec", best_spec.to_json()},
              {"trials", trials_json}};
}

}  // namespace rbc
