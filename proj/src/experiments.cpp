#include "rbc/experiments.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "rbc/error.hpp"
#include "rbc/features.hpp"
#include "rbc/search.hpp"
#include "rbc/selection.hpp"

namespace fs = std::filesystem;

namespace rbc {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string> kConfigKeys = {
    "data",   "out",      "seed",          "scorer",        "families",      "search", "n_iter",
    "folds",  "train_fraction", "preset",  "features",      "projection",    "spaces", "wrapper_sizes",
    "wrapper_spaces", "models", "pca_variance"};

template <class T>
T field(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw_parameter(std::string("config field '") + key + "' has the wrong type");
  }
}

void check_projection(const Json& p) {
  if (p.is_null()) return;
  if (!p.is_object() || !p.contains("kind")) throw_parameter("projection must be an object with a \"kind\"");
  const auto kind = p["kind"];
  if (kind != "pca" && kind != "lda") throw_parameter("projection kind must be \"pca\" or \"lda\"");
  for (auto it = p.begin(); it != p.end(); ++it)
    if (it.key() != "kind" && it.key() != "variance") throw_parameter("unknown projection field '" + it.key() + "'");
  if (p.contains("variance")) {
    if (!p["variance"].is_number()) throw_parameter("projection variance must be a number");
    const double v = p["variance"].get<double>();
    if (!(v > 0 && v <= 1)) throw_parameter("projection variance must be in (0, 1]");
  }
}

}  // namespace

Json ExperimentConfig::to_json() const {
  Json fams = Json::array();
  for (auto f : families) fams.push_back(rbc::to_string(f));
  Json mods = Json::array();
  for (const auto& m : models) mods.push_back(m.to_json());
  return Json{{"data", data},
              {"seed", seed},
              {"scorer", rbc::to_string(scorer)},
              {"families", fams},
              {"search", search},
              {"n_iter", n_iter},
              {"folds", folds},
              {"train_fraction", train_fraction},
              {"preset", rbc::to_string(preset)},
              {"features", features},
              {"projection", projection},
              {"spaces", spaces},
              {"wrapper_sizes", wrapper_sizes},
              {"wrapper_spaces", wrapper_spaces},
              {"models", mods},
              {"pca_variance", pca_variance}};
}

ExperimentConfig ExperimentConfig::from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw_parameter("experiment config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kConfigKeys.contains(it.key())) throw_parameter("unknown config field '" + it.key() + "'");
  ExperimentConfig c;
  c.data = field<std::string>(j, "data", "");
  if (c.data.empty()) throw_parameter("config needs a \"data\" feature CSV");
  c.data_path = fs::path(c.data).is_absolute() || base_dir.empty() ? fs::path(c.data) : base_dir / c.data;
  if (!fs::exists(c.data_path)) throw_io("data file not found: " + c.data_path.string());
  c.out = field<std::string>(j, "out", "");
  c.seed = field<std::uint64_t>(j, "seed", c.seed);
  c.scorer = parse_scorer(field<std::string>(j, "scorer", rbc::to_string(c.scorer)));
  for (const auto& f : field<std::vector<std::string>>(j, "families", {})) c.families.push_back(parse_family(f));
  c.search = field<std::string>(j, "search", c.search);
  if (c.search != "randomized" && c.search != "grid") throw_parameter("search must be \"randomized\" or \"grid\"");
  c.n_iter = field<int>(j, "n_iter", c.n_iter);
  if (c.n_iter < 1) throw_parameter("n_iter must be >= 1");
  c.folds = field<int>(j, "folds", c.folds);
  if (c.folds < 2) throw_parameter("folds must be >= 2");
  c.train_fraction = field<double>(j, "train_fraction", c.train_fraction);
  if (!(c.train_fraction > 0 && c.train_fraction < 1)) throw_parameter("train_fraction must be in (0, 1)");
  c.preset = parse_preset(field<std::string>(j, "preset", rbc::to_string(c.preset)));
  c.features = field<std::vector<std::string>>(j, "features", {});
  c.projection = j.contains("projection") ? j["projection"] : Json();
  check_projection(c.projection);
  c.spaces = j.contains("spaces") && !j["spaces"].is_null() ? j["spaces"] : Json::object();
  c.wrapper_spaces = j.contains("wrapper_spaces") && !j["wrapper_spaces"].is_null() ? j["wrapper_spaces"] : Json::object();
  for (const Json* sp : {&c.spaces, &c.wrapper_spaces}) {
    if (!sp->is_object()) throw_parameter("spaces must map family names to parameter spaces");
    for (auto it = sp->begin(); it != sp->end(); ++it) {
      parse_family(it.key());
      ParamSpace::from_json(it.value());
    }
  }
  c.wrapper_sizes = field<std::vector<std::size_t>>(j, "wrapper_sizes", {});
  if (j.contains("models") && !j["models"].is_null())
    for (const auto& m : j["models"]) c.models.push_back(resolve(ModelSpec::from_json(m)));
  c.pca_variance = field<double>(j, "pca_variance", c.pca_variance);
  if (!(c.pca_variance > 0 && c.pca_variance <= 1)) throw_parameter("pca_variance must be in (0, 1]");
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  return from_json(read_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Shared report pieces
// ---------------------------------------------------------------------------

Json evaluation_json(const std::string& name, const ConfusionMatrix& cm) {
  return Json{{"name", name}, {"confusion", to_json(cm)}, {"metrics", to_json(metric_report(cm))}};
}

namespace {

Json header(const char* experiment, const ExperimentConfig& cfg, const Dataset& ds) {
  const Json c = cfg.to_json();
  Json counts = Json::object();
  const auto cc = ds.class_counts();
  for (std::size_t i = 0; i < ds.classes.size(); ++i) counts[ds.classes[i]] = cc[i];
  return Json{{"experiment", experiment},
              {"config", c},
              {"config_hash", json_hash(c)},
              {"seed", cfg.seed},
              {"catalog_version", std::string(kCatalogVersion)},
              {"preset_version", kPresetVersion},
              {"data", {{"rows", ds.rows()}, {"features", ds.cols()}, {"class_counts", counts}}}};
}

struct Partition {
  Dataset train, test;
  Json info;
};

Partition partition(const Dataset& ds, const ExperimentConfig& cfg) {
  const auto s = split_train_test(ds.y, cfg.train_fraction, cfg.seed);
  return Partition{ds.subset(s.train), ds.subset(s.test),
                   Json{{"train_fraction", cfg.train_fraction},
                        {"train_rows", s.train.size()},
                        {"test_rows", s.test.size()},
                        {"manifest_hash", json_hash(split_manifest(s, cfg.train_fraction, cfg.seed))}}};
}

Dataset with_features(const Dataset& ds, const std::vector<std::string>& names) {
  return names.empty() ? ds : ds.select_features(names);
}

ConfusionMatrix evaluate(const TrainedModel& m, const Dataset& test) {
  return confusion(test.y, m.predict(test), test.classes);
}

SearchOptions search_options(const ExperimentConfig& cfg) {
  SearchOptions o;
  o.folds = cfg.folds;
  o.scorer = cfg.scorer;
  o.seed = cfg.seed;
  return o;
}

ParamSpace space_for(const Json& overrides, Family f, bool fallback_default) {
  const auto name = to_string(f);
  if (overrides.contains(name)) return ParamSpace::from_json(overrides[name]);
  return fallback_default ? default_space(f) : ParamSpace{};
}

std::vector<Family> families_or(const ExperimentConfig& cfg, std::vector<Family> fallback) {
  return cfg.families.empty() ? fallback : cfg.families;
}

/// Scaled-then-projected copies of train and test; statistics come from train only.
struct Projected {
  Dataset train, test;
  Json info;
};

Projected project(const Dataset& train, const Dataset& test, const std::string& kind, double variance) {
  const auto scaler = standard_scale_fit(train.X);
  Dataset tr = train, te = test;
  tr.X = standard_scale_apply(scaler, train.X);
  te.X = standard_scale_apply(scaler, test.X);
  Projection p = kind == "pca" ? pca_fit(tr.X) : lda_fit(tr.X, tr.y, static_cast<int>(tr.classes.size()));
  if (kind == "pca") p = p.truncated(p.components_for(variance));
  Json info{{"kind", kind}, {"components", p.components.cols()}, {"ratios", p.ratios}, {"warnings", p.warnings}};
  if (kind == "pca") info["variance"] = variance;
  return Projected{p.apply(tr), p.apply(te), info};
}

/// Feature subset then optional projection, as configured.
Projected prepare(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test) {
  Dataset tr = with_features(train, cfg.features), te = with_features(test, cfg.features);
  if (cfg.projection.is_null()) return Projected{tr, te, Json()};
  const auto kind = cfg.projection["kind"].get<std::string>();
  return project(tr, te, kind, cfg.projection.value("variance", cfg.pca_variance));
}

Json model_row(const std::string& name, const ModelSpec& spec, std::size_t n_features, const ConfusionMatrix& cm) {
  Json e = evaluation_json(name, cm);
  e["spec"] = resolve(spec).to_json();
  e["features"] = n_features;
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Experiment 1
// ---------------------------------------------------------------------------

Json run_experiment1(const ExperimentConfig& cfg, const Dataset& input) {
  if (!cfg.projection.is_null()) throw_parameter("exp1 does not take a projection; use exp2 or exp3");
  const Dataset ds = with_features(input, cfg.features);
  Json report = header("exp1", cfg, ds);
  const auto families = families_or(cfg, learned_families());
  for (auto f : families)
    if (is_rule(f)) throw_parameter("exp1 compares learned families; " + to_string(f) + " is a rule");

  Json baseline = Json::array();
  for (auto f : families) {
    const auto spec = resolve(preset(f, Preset::library_default, cfg.seed));
    const auto pred = cross_val_predict(spec, ds, cfg.folds, cfg.seed);
    auto e = model_row(short_name(f), spec, ds.cols(), confusion(ds.y, pred, ds.classes));
    e["family"] = to_string(f);
    baseline.push_back(e);
  }
  report["baseline"] = {{"protocol", "stratified " + std::to_string(cfg.folds) + "-fold CV on every row, pooled"},
                        {"models", baseline}};

  const auto part = partition(ds, cfg);
  report["split"] = part.info;
  Json tuned = Json::array();
  for (auto f : families) {
    const auto space = space_for(cfg.spaces, f, true);
    const auto base = preset(f, Preset::library_default, cfg.seed);
    const auto res = cfg.search == "grid" ? grid_search(space, base, part.train, search_options(cfg))
                                          : randomized_search(space, base, part.train, cfg.n_iter, search_options(cfg));
    const auto model = fit(res.best_spec, part.train);
    auto e = model_row(short_name(f), res.best_spec, part.train.cols(), evaluate(model, part.test));
    e["family"] = to_string(f);
    e["cv_score"] = res.best_score;
    e["search"] = res.to_json();
    tuned.push_back(e);
  }
  report["tuned"] = {{"search", cfg.search}, {"scorer", to_string(cfg.scorer)}, {"models", tuned}};
  return report;
}

// ---------------------------------------------------------------------------
// Experiment 2
// ---------------------------------------------------------------------------

Json run_experiment2(const ExperimentConfig& cfg, const Dataset& input) {
  const Dataset ds = with_features(input, cfg.features);
  Json report = header("exp2", cfg, ds);
  const auto part = partition(ds, cfg);
  report["split"] = part.info;
  const auto families = families_or(cfg, {Family::random_forest, Family::gradient_boosting});

  Json blocks = Json::array();
  Json table = Json::array();
  for (auto f : families) {
    if (f != Family::gradient_boosting && f != Family::random_forest && f != Family::extra_trees &&
        f != Family::cart)
      throw_parameter("exp2 ranks features with tree families only, got " + to_string(f));
    const auto spec = resolve(preset(f, cfg.preset, cfg.seed));
    const auto full = fit(spec, part.train);
    const auto ranking = f == Family::gradient_boosting ? gb_importance(full) : rf_importance(full);

    const auto wrapper = wrapper_incremental(space_for(cfg.wrapper_spaces, f, false), spec, ranking, part.train,
                                             search_options(cfg), cfg.wrapper_sizes);
    const auto subset_model = fit(wrapper.best_spec, part.train.select_features(wrapper.best_features));

    const auto pca = project(part.train, part.test, "pca", cfg.pca_variance);
    const auto lda = project(part.train, part.test, "lda", cfg.pca_variance);
    const auto pca_model = fit(spec, pca.train);
    const auto lda_model = fit(spec, lda.train);

    const auto name = short_name(f);
    Json variants = Json::array();
    variants.push_back(model_row(name + " all features", spec, part.train.cols(), evaluate(full, part.test)));
    variants.push_back(model_row(name + " wrapper", wrapper.best_spec, wrapper.best_size,
                                 evaluate(subset_model, part.test)));
    variants.push_back(model_row(name + " PCA", spec, pca.train.cols(), evaluate(pca_model, pca.test)));
    variants.push_back(model_row(name + " LDA", spec, lda.train.cols(), evaluate(lda_model, lda.test)));
    for (const auto& v : variants) table.push_back(v);

    blocks.push_back({{"family", to_string(f)},
                      {"ranking", ranking.to_json()},
                      {"wrapper", wrapper.to_json()},
                      {"pca", pca.info},
                      {"lda", lda.info}});
  }
  report["selection"] = blocks;
  report["comparison"] = table;
  return report;
}

// ---------------------------------------------------------------------------
// Experiment 3
// ---------------------------------------------------------------------------

Json run_experiment3(const ExperimentConfig& cfg, const Dataset& ds) {
  Json report = header("exp3", cfg, ds);
  std::vector<ModelSpec> models = cfg.models;
  if (models.empty())
    for (auto f : families_or(cfg, {Family::gradient_boosting, Family::random_forest}))
      models.push_back(resolve(preset(f, cfg.preset, cfg.seed)));
  for (const auto& m : models)
    if (is_rule(m.family)) throw_parameter("exp3 compares learned models against the rules; drop " + to_string(m.family));

  auto block = [&](const Dataset& data, std::vector<Family> rules) {
    const auto part = partition(data, cfg);
    const auto view = prepare(cfg, part.train, part.test);
    Json rows = Json::array();
    for (const auto& spec : models) {
      const auto m = fit(spec, view.train);
      rows.push_back(model_row(short_name(spec.family), spec, view.train.cols(), evaluate(m, view.test)));
    }
    for (auto r : rules) {
      const ModelSpec spec = resolve(ModelSpec{r, Json::object(), cfg.seed});
      const auto m = fit(spec, part.train);
      auto e = model_row(short_name(r), spec, rule_features(r).size(), evaluate(m, part.test));
      e["fitted"] = m.to_json()["fitted"];
      rows.push_back(e);
    }
    Json b{{"classes", data.classes}, {"split", part.info}, {"models", rows}};
    if (!view.info.is_null()) b["projection"] = view.info;
    return b;
  };

  report["three_class"] = block(ds, {Family::asakura});
  const std::vector<std::string> binary = {"c", "e"};
  const Dataset two = ds.restrict_classes(binary);
  if (two.classes.size() != 2) throw_data("the two-class comparison needs both c and e rows");
  report["two_class"] = block(two, {Family::circularity_rule, Family::eccentricity_rule});
  return report;
}

// ---------------------------------------------------------------------------
// Text rendering
// ---------------------------------------------------------------------------

namespace {

std::string pct(const Json& v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100 * v.get<double>());
  return buf;
}

std::string padded(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

void metrics_table(std::ostringstream& os, const Json& rows) {
  os << padded("model", 22) << padded("feats", 7) << "     F    SDS    CBA    MCC\n";
  for (const auto& r : rows) {
    const auto& m = r["metrics"];
    os << padded(r["name"].get<std::string>(), 22) << padded(std::to_string(r["features"].get<std::size_t>()), 7)
       << pct(m["f_weighted"]) << ' ' << pct(m["sds"]) << ' ' << pct(m["cba"]) << ' ' << pct(m["mcc"]) << '\n';
  }
}

void matrices(std::ostringstream& os, const Json& rows) {
  for (const auto& r : rows) {
    const auto cm = confusion_from_json(r["confusion"]);
    os << '\n' << r["name"].get<std::string>() << '\n' << render_text(cm, metric_report(cm));
  }
}

}  // namespace

std::string render_experiment_text(const Json& report) {
  std::ostringstream os;
  const auto kind = report.at("experiment").get<std::string>();
  os << kind << "  seed " << report["seed"].get<std::uint64_t>() << "  config " << report["config_hash"].get<std::string>()
     << "  " << report["catalog_version"].get<std::string>() << "  " << report["preset_version"].get<std::string>()
     << "\n";
  os << "rows " << report["data"]["rows"].get<std::size_t>() << ", features " << report["data"]["features"].get<std::size_t>()
     << "\n\n";
  if (kind == "exp1") {
    const auto& base = report["baseline"]["models"];
    const auto& tuned = report["tuned"]["models"];
    os << "scores (%), baseline = pooled CV with library defaults, tuned = test split\n";
    os << padded("model", 8) << "  base F base SDS  tuned F tuned SDS  cv " << report["tuned"]["scorer"].get<std::string>()
       << '\n';
    for (std::size_t i = 0; i < base.size(); ++i) {
      os << padded(base[i]["name"].get<std::string>(), 8) << "  " << pct(base[i]["metrics"]["f_weighted"]) << "   "
         << pct(base[i]["metrics"]["sds"]) << "   " << pct(tuned[i]["metrics"]["f_weighted"]) << "    "
         << pct(tuned[i]["metrics"]["sds"]) << "  " << pct(tuned[i]["cv_score"]) << '\n';
    }
    os << "\nbaseline matrices\n";
    matrices(os, base);
    os << "\ntuned matrices\n";
    matrices(os, tuned);
  } else if (kind == "exp2") {
    metrics_table(os, report["comparison"]);
    for (const auto& b : report["selection"]) {
      os << '\n' << b["family"].get<std::string>() << ": wrapper best size " << b["wrapper"]["best_size"].get<std::size_t>()
         << " (cv " << pct(b["wrapper"]["best_score"]) << "%)\n  ";
      bool first = true;
      for (const auto& n : b["wrapper"]["best_features"]) {
        os << (first ? "" : ", ") << n.get<std::string>();
        first = false;
      }
      os << "\n  PCA components " << b["pca"]["components"].get<long long>() << ", LDA components "
         << b["lda"]["components"].get<long long>() << '\n';
    }
    matrices(os, report["comparison"]);
  } else if (kind == "exp3") {
    for (const char* key : {"three_class", "two_class"}) {
      os << (std::string(key) == "three_class" ? "three classes\n" : "\ncircular vs elongated\n");
      metrics_table(os, report[key]["models"]);
      matrices(os, report[key]["models"]);
    }
  } else {
    throw_data("unknown experiment kind '" + kind + "'");
  }
  return os.str();
}

}  // namespace rbc
