// rbcmorph: batch driver for segmentation, feature extraction, model
// training, tuning, selection and the three experiments.
//
// Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 some items failed.
// RBC_WORKERS sets the worker count (default: hardware threads).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rbc/dataset.hpp"
#include "rbc/error.hpp"
#include "rbc/experiments.hpp"
#include "rbc/features.hpp"
#include "rbc/metrics.hpp"
#include "rbc/models.hpp"
#include "rbc/parallel.hpp"
#include "rbc/pipeline.hpp"
#include "rbc/search.hpp"
#include "rbc/selection.hpp"

namespace fs = std::filesystem;
using namespace rbc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPartial = 3;

void log_line(const std::string& s) { std::cerr << s << '\n'; }

/// "a,b,c" or "@file" with one name per line.
std::vector<std::string> feature_list(const std::string& arg) {
  std::vector<std::string> out;
  if (arg.empty()) return out;
  std::string line;
  if (arg[0] == '@') {
    std::ifstream in(arg.substr(1));
    if (!in) throw_io("cannot read " + arg.substr(1));
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) out.push_back(line);
    }
  } else {
    std::istringstream is(arg);
    while (std::getline(is, line, ','))
      if (!line.empty()) out.push_back(line);
  }
  return out;
}

/// Inline JSON or a path to a JSON file.
Json json_arg(const std::string& arg) {
  if (arg.empty()) return Json::object();
  if (arg.front() == '{' || arg.front() == '[') {
    try {
      return Json::parse(arg);
    } catch (const nlohmann::json::exception& e) {
      throw_parameter(std::string("invalid JSON argument: ") + e.what());
    }
  }
  return read_json_file(arg);
}

Dataset load_data(const std::string& path, const std::string& features) {
  Dataset ds = read_dataset_csv(path);
  const auto names = feature_list(features);
  return names.empty() ? ds : ds.select_features(names);
}

void emit(const std::string& out, const Json& j) {
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(out, j);
}

struct Common {
  std::string config;
  std::uint64_t seed = 42;
  std::string scorer = "sds";
  std::string out;
};

int run_experiment(const std::string& which, const Common& c, const CLI::App& sub) {
  auto cfg = ExperimentConfig::load(c.config);
  if (sub.count("--seed")) cfg.seed = c.seed;
  if (sub.count("--scorer")) cfg.scorer = parse_scorer(c.scorer);
  if (sub.count("--out")) cfg.out = c.out;
  const Dataset ds = read_dataset_csv(cfg.data_path);
  const Json report = which == "exp1"   ? run_experiment1(cfg, ds)
                      : which == "exp2" ? run_experiment2(cfg, ds)
                                        : run_experiment3(cfg, ds);
  const auto text = render_experiment_text(report);
  if (cfg.out.empty()) {
    std::cout << text;
    return 0;
  }
  fs::path dir = cfg.out;
  if (dir.is_relative() && !sub.count("--out")) dir = fs::path(c.config).parent_path() / dir;
  fs::create_directories(dir);
  write_json_file(dir / (which + ".json"), report);
  write_text_file(dir / (which + ".txt"), text);
  if (which == "exp2")
    for (const auto& b : report["selection"]) {
      std::ostringstream csv;
      csv << "size,score\n";
      for (const auto& p : b["wrapper"]["curve"])
        csv << p["size"].get<std::size_t>() << ',' << format_number(p["score"].get<double>()) << '\n';
      write_text_file(dir / ("wrapper_" + b["family"].get<std::string>() + ".csv"), csv.str());
    }
  std::cout << text;
  log_line("wrote " + (dir / (which + ".json")).string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Red blood cell morphology toolkit"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "Worker threads (overrides RBC_WORKERS)")->check(CLI::NonNegativeNumber);

  // segment
  auto* seg = app.add_subcommand("segment", "Segment every image in a directory into cell crops and sidecars");
  std::string seg_in, seg_out;
  SegmentParams sp;
  bool no_split = false;
  seg->add_option("images", seg_in, "Input image directory")->required();
  seg->add_option("--out", seg_out, "Output directory")->required();
  seg->add_option("--sigma", sp.sigma, "Gaussian sigma")->capture_default_str();
  seg->add_option("--open-radius", sp.open_radius, "Opening disc radius")->capture_default_str();
  seg->add_option("--canny-low", sp.canny_low, "Canny low threshold")->capture_default_str();
  seg->add_option("--canny-high", sp.canny_high, "Canny high threshold")->capture_default_str();
  seg->add_option("--min-area", sp.min_area, "Minimum cell area in pixels")->capture_default_str();
  seg->add_flag("--invert", sp.invert, "Cells are brighter than the background");
  seg->add_flag("--no-split", no_split, "Keep clusters of touching cells whole");

  // extract
  auto* ext = app.add_subcommand("extract", "Compute the 121 features for every labelled cell");
  std::string ext_in, ext_labels, ext_out;
  FeatureOptions fo;
  ext->add_option("cells", ext_in, "Directory written by segment")->required();
  ext->add_option("--labels", ext_labels, "CSV of cell_id,label")->required();
  ext->add_option("--out", ext_out, "Feature CSV to write")->required();
  ext->add_option("--glcm-levels", fo.glcm_levels, "Gray levels for co-occurrence matrices")->capture_default_str();

  // tune
  auto* tune = app.add_subcommand("tune", "Cross-validated hyperparameter search");
  Common tc;
  std::string tune_data, tune_family, tune_space, tune_mode = "randomized", tune_features;
  int tune_iter = kDefaultSearchIterations, tune_folds = 10;
  tune->add_option("--data", tune_data, "Feature CSV")->required();
  tune->add_option("--family", tune_family, "Classifier family")->required();
  tune->add_option("--space", tune_space, "Parameter space JSON file (default: built-in space)");
  tune->add_option("--mode", tune_mode, "randomized or grid")->check(CLI::IsMember({"randomized", "grid"}));
  tune->add_option("--n-iter", tune_iter, "Sampled points for randomized search")->capture_default_str();
  tune->add_option("--folds", tune_folds, "Cross-validation folds")->capture_default_str();
  tune->add_option("--features", tune_features, "Comma list or @file of feature names");
  tune->add_option("--seed", tc.seed, "Seed")->capture_default_str();
  tune->add_option("--scorer", tc.scorer, "f_weighted, sds or accuracy")->capture_default_str();
  tune->add_option("--out", tc.out, "Report JSON (default: stdout)");

  // train
  auto* train = app.add_subcommand("train", "Fit one model and save it as JSON");
  Common trc;
  std::string train_data, train_family, train_preset = "default", train_params, train_features;
  train->add_option("--data", train_data, "Feature CSV")->required();
  train->add_option("--family", train_family, "Classifier family")->required();
  train->add_option("--preset", train_preset, "default, tuned_sds or tuned_f")->capture_default_str();
  train->add_option("--params", train_params, "Hyperparameter overrides: inline JSON or a file");
  train->add_option("--features", train_features, "Comma list or @file of feature names");
  train->add_option("--seed", trc.seed, "Seed")->capture_default_str();
  train->add_option("--out", trc.out, "Model JSON")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a saved model on a labelled feature CSV");
  std::string eval_model, eval_data, eval_out, eval_csv;
  eval->add_option("--model", eval_model, "Model JSON")->required();
  eval->add_option("--data", eval_data, "Feature CSV")->required();
  eval->add_option("--out", eval_out, "Report JSON");
  eval->add_option("--matrix-csv", eval_csv, "Confusion matrix CSV");

  // select
  auto* sel = app.add_subcommand("select", "Importance ranking and wrapper curve");
  Common sc;
  std::string sel_data, sel_family = "random_forest", sel_preset = "tuned_sds", sel_space, sel_sizes;
  int sel_folds = 10;
  sel->add_option("--data", sel_data, "Feature CSV")->required();
  sel->add_option("--family", sel_family, "random_forest, extra_trees, cart or gradient_boosting")->capture_default_str();
  sel->add_option("--preset", sel_preset, "Preset of the ranking model")->capture_default_str();
  sel->add_option("--space", sel_space, "Grid searched at every prefix size (default: preset only)");
  sel->add_option("--sizes", sel_sizes, "Comma list of prefix sizes (default: 1..30, then every 5)");
  sel->add_option("--folds", sel_folds, "Cross-validation folds")->capture_default_str();
  sel->add_option("--seed", sc.seed, "Seed")->capture_default_str();
  sel->add_option("--scorer", sc.scorer, "f_weighted, sds or accuracy")->capture_default_str();
  sel->add_option("--out", sc.out, "Output directory")->required();

  // experiments
  Common ec;
  std::vector<std::pair<std::string, CLI::App*>> exps;
  for (const char* name : {"exp1", "exp2", "exp3"}) {
    const char* desc = std::string(name) == "exp1"   ? "Baselines and tuned classifiers"
                       : std::string(name) == "exp2" ? "Feature ranking, wrapper selection, PCA and LDA"
                                                     : "Comparison with shape-factor rules";
    auto* e = app.add_subcommand(name, desc);
    e->add_option("--config", ec.config, "Experiment config JSON")->required();
    e->add_option("--seed", ec.seed, "Override the config seed");
    e->add_option("--scorer", ec.scorer, "Override the config scorer");
    e->add_option("--out", ec.out, "Override the output directory");
    exps.emplace_back(name, e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (workers > 0) set_worker_count(workers);

  try {
    if (seg->parsed()) {
      sp.split_clusters = !no_split;
      const auto s = segment_directory(seg_in, seg_out, sp, log_line);
      std::cout << s.line() << '\n';
      return s.failures > 0 ? kExitPartial : 0;
    }
    if (ext->parsed()) {
      const auto s = extract_directory(ext_in, ext_labels, ext_out, fo, log_line);
      std::cout << s.line() << '\n';
      return s.failures > 0 ? kExitPartial : 0;
    }
    if (tune->parsed()) {
      const auto ds = load_data(tune_data, tune_features);
      const auto family = parse_family(tune_family);
      const auto space = tune_space.empty() ? default_space(family) : ParamSpace::from_json(read_json_file(tune_space));
      SearchOptions o;
      o.folds = tune_folds;
      o.scorer = parse_scorer(tc.scorer);
      o.seed = tc.seed;
      const auto base = preset(family, Preset::library_default, tc.seed);
      const auto r = tune_mode == "grid" ? grid_search(space, base, ds, o) : randomized_search(space, base, ds, tune_iter, o);
      Json j = r.to_json();
      j["catalog_version"] = std::string(kCatalogVersion);
      j["features"] = ds.feature_names;
      emit(tc.out, j);
      log_line("best " + tc.scorer + " " + format_number(r.best_score) + " with " + r.best_spec.params.dump());
      return 0;
    }
    if (train->parsed()) {
      const auto ds = load_data(train_data, train_features);
      auto spec = preset(parse_family(train_family), parse_preset(train_preset), trc.seed);
      const Json overrides = json_arg(train_params);
      for (auto it = overrides.begin(); it != overrides.end(); ++it) spec.params[it.key()] = it.value();
      const auto model = fit(spec, ds);
      model.save(trc.out);
      log_line("trained " + to_string(model.family()) + " on " + std::to_string(ds.rows()) + " rows");
      return 0;
    }
    if (eval->parsed()) {
      const auto model = TrainedModel::load(eval_model);
      const auto ds = read_dataset_csv(eval_data);
      std::vector<std::string> truth, pred;
      const auto p = model.predict(ds);
      for (std::size_t i = 0; i < p.size(); ++i) {
        truth.push_back(ds.classes[static_cast<std::size_t>(ds.y[i])]);
        pred.push_back(model.classes()[static_cast<std::size_t>(p[i])]);
      }
      const auto cm = confusion(truth, pred, model.classes());
      const auto rep = metric_report(cm);
      std::cout << render_text(cm, rep);
      if (!eval_out.empty()) {
        Json j = evaluation_json(to_string(model.family()), cm);
        j["spec"] = model.spec().to_json();
        j["data_rows"] = ds.rows();
        write_json_file(eval_out, j);
      }
      if (!eval_csv.empty()) write_text_file(eval_csv, confusion_csv(cm));
      return 0;
    }
    if (sel->parsed()) {
      const auto ds = read_dataset_csv(sel_data);
      const auto family = parse_family(sel_family);
      const auto spec = resolve(preset(family, parse_preset(sel_preset), sc.seed));
      const auto model = fit(spec, ds);
      const auto ranking = family == Family::gradient_boosting ? gb_importance(model) : rf_importance(model);
      std::vector<std::size_t> sizes;
      for (const auto& s : feature_list(sel_sizes)) {
        try {
          sizes.push_back(static_cast<std::size_t>(std::stoul(s)));
        } catch (const std::exception&) {
          throw_parameter("--sizes expects integers, got '" + s + "'");
        }
      }
      SearchOptions o;
      o.folds = sel_folds;
      o.scorer = parse_scorer(sc.scorer);
      o.seed = sc.seed;
      const auto space = sel_space.empty() ? ParamSpace{} : ParamSpace::from_json(read_json_file(sel_space));
      const auto w = wrapper_incremental(space, spec, ranking, ds, o, sizes);
      const fs::path dir = sc.out;
      fs::create_directories(dir);
      Json r{{"family", to_string(family)},
             {"seed", sc.seed},
             {"scorer", sc.scorer},
             {"catalog_version", std::string(kCatalogVersion)},
             {"preset_version", kPresetVersion},
             {"ranking_spec", spec.to_json()}};
      write_json_file(dir / "ranking.json", ranking.to_json());
      r["wrapper"] = w.to_json();
      write_json_file(dir / "wrapper.json", r);
      write_text_file(dir / "curve.csv", w.curve_csv());
      std::cout << w.curve_csv();
      log_line("best prefix " + std::to_string(w.best_size) + " scores " + format_number(w.best_score));
      return 0;
    }
    for (const auto& [name, sub] : exps)
      if (sub->parsed()) return run_experiment(name, ec, *sub);
  } catch (const Error& e) {
    log_line("error: " + std::string(e.what()));
    return e.kind() == ErrorKind::parameter ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    log_line("error: " + std::string(e.what()));
    return kExitData;
  }
  return kExitUsage;
}
