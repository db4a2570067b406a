#include "rbc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rbc/error.hpp"
#include "rbc/features.hpp"
#include "rbc/random.hpp"

namespace rbc {

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw_data("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write " + path.string());
  out << text;
  if (!out) throw_io("write failed for " + path.string());
}

std::string json_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> c(classes.size(), 0);
  for (int v : y) ++c.at(static_cast<std::size_t>(v));
  return c;
}

void Dataset::validate() const {
  if (y.size() != rows()) throw_data("dataset: label count does not match rows");
  if (feature_names.size() != cols()) throw_data("dataset: feature names do not match columns");
  if (!row_ids.empty() && row_ids.size() != rows()) throw_data("dataset: row id count does not match rows");
  if (!images.empty() && images.size() != rows()) throw_data("dataset: image count does not match rows");
  for (int v : y)
    if (v < 0 || static_cast<std::size_t>(v) >= classes.size()) throw_data("dataset: label out of range");
  if (!X.allFinite()) throw_data("dataset: non-finite feature value");
}

Dataset Dataset::subset(std::span<const std::size_t> rows_) const {
  Dataset d;
  d.classes = classes;
  d.feature_names = feature_names;
  d.source = source;
  d.X.resize(static_cast<Eigen::Index>(rows_.size()), X.cols());
  d.y.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows_[i]);
    if (rows_[i] >= rows()) throw_parameter("dataset subset: row index out of range");
    d.X.row(static_cast<Eigen::Index>(i)) = X.row(r);
    d.y.push_back(y[rows_[i]]);
    if (!row_ids.empty()) d.row_ids.push_back(row_ids[rows_[i]]);
    if (!images.empty()) d.images.push_back(images[rows_[i]]);
  }
  return d;
}

Dataset Dataset::select_columns(std::span<const std::size_t> cols_) const {
  Dataset d;
  d.classes = classes;
  d.source = source;
  d.row_ids = row_ids;
  d.images = images;
  d.y = y;
  d.X.resize(X.rows(), static_cast<Eigen::Index>(cols_.size()));
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    if (cols_[j] >= cols()) throw_parameter("dataset: column index out of range");
    d.X.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols_[j]));
    d.feature_names.push_back(feature_names[cols_[j]]);
  }
  return d;
}

Dataset Dataset::select_features(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    const auto it = std::find(feature_names.begin(), feature_names.end(), n);
    if (it == feature_names.end()) throw_data("dataset has no feature named '" + n + "'");
    idx.push_back(static_cast<std::size_t>(it - feature_names.begin()));
  }
  return select_columns(idx);
}

Dataset Dataset::restrict_classes(std::span<const std::string> keep) const {
  std::vector<int> remap(classes.size(), -1);
  std::vector<std::string> kept;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (std::find(keep.begin(), keep.end(), classes[c]) != keep.end()) {
      remap[c] = static_cast<int>(kept.size());
      kept.push_back(classes[c]);
    }
  std::vector<std::size_t> rows_;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (remap[static_cast<std::size_t>(y[i])] >= 0) rows_.push_back(i);
  Dataset d = subset(rows_);
  d.classes = kept;
  for (auto& v : d.y) v = remap[static_cast<std::size_t>(v)];
  return d;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw_data(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "image" || header[1] != "cell_id" || header[2] != "label")
    throw_data(path.string() + ": header must start with image,cell_id,label");

  const std::size_t d = header.size() - 3;
  std::vector<double> values;
  std::vector<std::string> labels, ids, imgs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != header.size()) throw_data(where + ": expected " + std::to_string(header.size()) + " fields");
    if (std::find(kAllClasses.begin(), kAllClasses.end(), f[2]) == kAllClasses.end())
      throw_data(where + ": label '" + f[2] + "' is not one of c, e, o");
    labels.push_back(f[2]);
    ids.push_back(f[1]);
    imgs.push_back(f[0]);
    for (std::size_t j = 3; j < f.size(); ++j) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(f[j], &used);
      } catch (const std::exception&) {
        throw_data(where + ": column '" + header[j] + "' is not a number");
      }
      if (used != f[j].size() || !std::isfinite(v))
        throw_data(where + ": column '" + header[j] + "' is not a finite number");
      values.push_back(v);
    }
  }
  if (labels.empty()) throw_data(path.string() + ": no data rows");

  Dataset ds;
  ds.source = path.string();
  ds.feature_names.assign(header.begin() + 3, header.end());
  for (const auto& c : kAllClasses)
    if (std::find(labels.begin(), labels.end(), c) != labels.end()) ds.classes.push_back(c);
  const auto n = static_cast<Eigen::Index>(labels.size());
  ds.X.resize(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.X(i, static_cast<Eigen::Index>(j)) = values[static_cast<std::size_t>(i) * d + j];
    ds.y.push_back(static_cast<int>(std::find(ds.classes.begin(), ds.classes.end(), labels[i]) - ds.classes.begin()));
  }
  ds.row_ids = std::move(ids);
  ds.images = std::move(imgs);
  ds.validate();
  return ds;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  ds.validate();
  std::ostringstream out;
  out << "image,cell_id,label";
  for (const auto& n : ds.feature_names) out << ',' << csv_field(n);
  out << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const std::string id = ds.row_ids.empty() ? "row" + std::to_string(i) : ds.row_ids[i];
    if (!ds.images.empty()) out << csv_field(ds.images[i]);
    out << ',' << csv_field(id) << ',' << ds.classes[static_cast<std::size_t>(ds.y[i])];
    for (std::size_t j = 0; j < ds.cols(); ++j)
      out << ',' << format_number(ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out << '\n';
  }
  write_text_file(path, out.str());
}

ScalerStats standard_scale_fit(const Eigen::MatrixXd& X) {
  if (X.rows() < 2) throw_data("standard scaling needs at least two rows");
  ScalerStats s;
  const double n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean().transpose();
  s.stddev.resize(X.cols());
  s.degenerate.assign(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double ss = (X.col(j).array() - s.mean[j]).square().sum();
    const double sd = std::sqrt(ss / (n - 1));
    // Relative test so columns that are constant up to rounding count too.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) {
      s.stddev[j] = 1.0;
      s.degenerate[static_cast<std::size_t>(j)] = true;
    } else {
      s.stddev[j] = sd;
    }
  }
  return s;
}

Eigen::MatrixXd standard_scale_apply(const ScalerStats& s, const Eigen::MatrixXd& X) {
  if (X.cols() != s.mean.size()) throw_parameter("scaler: column count mismatch");
  Eigen::MatrixXd Z = X;
  for (Eigen::Index j = 0; j < X.cols(); ++j) Z.col(j) = (X.col(j).array() - s.mean[j]) / s.stddev[j];
  return Z;
}

Eigen::MatrixXd standard_scale_inverse(const ScalerStats& s, const Eigen::MatrixXd& Z) {
  if (Z.cols() != s.mean.size()) throw_parameter("scaler: column count mismatch");
  Eigen::MatrixXd X = Z;
  for (Eigen::Index j = 0; j < Z.cols(); ++j) X.col(j) = Z.col(j).array() * s.stddev[j] + s.mean[j];
  return X;
}

namespace {

std::vector<std::vector<std::size_t>> by_class(std::span<const int> labels) {
  int k = 0;
  for (int v : labels) {
    if (v < 0) throw_parameter("negative class label");
    k = std::max(k, v + 1);
  }
  std::vector<std::vector<std::size_t>> g(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) g[static_cast<std::size_t>(labels[i])].push_back(i);
  return g;
}

}  // namespace

Split split_train_test(std::span<const int> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw_parameter("train fraction must be in (0, 1)");
  auto groups = by_class(labels);
  for (std::size_t c = 0; c < groups.size(); ++c)
    if (!groups[c].empty() && groups[c].size() < 2)
      throw_data("class " + std::to_string(c) + " has fewer than two members");

  const double test_frac = 1.0 - train_fraction;
  const auto n_test = static_cast<std::size_t>(std::ceil(test_frac * labels.size() - 1e-9));
  std::vector<std::size_t> quota(groups.size());
  std::vector<double> rem(groups.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    const double exact = test_frac * groups[c].size();
    quota[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[c] = exact - quota[c];
    assigned += quota[c];
  }
  std::vector<std::size_t> order(groups.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; assigned < n_test && k < order.size(); ++k) {
    const std::size_t c = order[k];
    if (quota[c] < groups[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  Rng rng(seed);
  Split s;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& g = groups[c];
    rng.shuffle(std::span<std::size_t>(g));
    s.test.insert(s.test.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    s.train.insert(s.train.end(), g.begin() + static_cast<std::ptrdiff_t>(quota[c]), g.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<Fold> kfold(std::size_t n, int k, std::uint64_t seed, std::span<const int> stratify) {
  if (k < 2) throw_parameter("k-fold needs k >= 2");
  if (static_cast<std::size_t>(k) > n) throw_parameter("k-fold: k exceeds the number of samples");
  if (!stratify.empty() && stratify.size() != n) throw_parameter("k-fold: label count does not match n");

  Rng rng(seed);
  std::vector<std::size_t> order;
  order.reserve(n);
  if (stratify.empty()) {
    for (std::size_t i = 0; i < n; ++i) order.push_back(i);
    rng.shuffle(std::span<std::size_t>(order));
  } else {
    auto groups = by_class(stratify);
    for (auto& g : groups) {
      if (!g.empty() && g.size() < static_cast<std::size_t>(k))
        throw_data("stratified k-fold: a class has fewer members than folds");
      rng.shuffle(std::span<std::size_t>(g));
      order.insert(order.end(), g.begin(), g.end());
    }
  }
  std::vector<std::vector<std::size_t>> member(static_cast<std::size_t>(k));
  for (std::size_t pos = 0; pos < order.size(); ++pos) member[pos % static_cast<std::size_t>(k)].push_back(order[pos]);

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto& valid = member[f];
    std::sort(valid.begin(), valid.end());
    std::vector<char> in_valid(n, 0);
    for (auto i : valid) in_valid[i] = 1;
    folds[f].valid = valid;
    for (std::size_t i = 0; i < n; ++i)
      if (!in_valid[i]) folds[f].train.push_back(i);
  }
  return folds;
}

Json split_manifest(const Split& s, double train_fraction, std::uint64_t seed) {
  Json j;
  j["seed"] = seed;
  j["train_fraction"] = train_fraction;
  j["train"] = s.train;
  j["test"] = s.test;
  return j;
}

}  // namespace rbc
