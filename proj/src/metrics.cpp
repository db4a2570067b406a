#include "rbc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rbc/error.hpp"

namespace rbc {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> cls, std::vector<std::vector<std::int64_t>> c)
    : classes(std::move(cls)), counts(std::move(c)) {
  validate();
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (const auto& r : counts)
    for (auto v : r) s += v;
  return s;
}

std::int64_t ConfusionMatrix::row_sum(std::size_t i) const {
  std::int64_t s = 0;
  for (auto v : counts[i]) s += v;
  return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t j) const {
  std::int64_t s = 0;
  for (const auto& r : counts) s += r[j];
  return s;
}

void ConfusionMatrix::validate() const {
  if (counts.size() != classes.size()) throw_data("confusion matrix: row count does not match classes");
  for (const auto& r : counts) {
    if (r.size() != classes.size()) throw_data("confusion matrix is not square");
    for (auto v : r)
      if (v < 0) throw_data("confusion matrix has a negative count");
  }
}

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
  cm.validate();
  if (cm.size() == 0 || cm.total() <= 0) throw_data("confusion matrix is empty");
}

double ratio(double a, double b) { return b > 0 ? a / b : 0.0; }

}  // namespace

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred,
                          const std::vector<std::string>& classes) {
  if (truth.size() != pred.size()) throw_parameter("confusion: label vectors differ in length");
  const auto k = classes.size();
  ConfusionMatrix cm(classes, std::vector<std::vector<std::int64_t>>(k, std::vector<std::int64_t>(k, 0)));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= k || pred[i] < 0 ||
        static_cast<std::size_t>(pred[i]) >= k)
      throw_data("confusion: label index out of range");
    ++cm.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> pred,
                          const std::vector<std::string>& classes) {
  auto index = [&](const std::string& s) {
    const auto it = std::find(classes.begin(), classes.end(), s);
    if (it == classes.end()) throw_data("confusion: unknown label '" + s + "'");
    return static_cast<int>(it - classes.begin());
  };
  std::vector<int> t, p;
  for (const auto& s : truth) t.push_back(index(s));
  for (const auto& s : pred) p.push_back(index(s));
  return confusion(t, p, classes);
}

double accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::int64_t d = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) d += cm.at(i, i);
  return static_cast<double>(d) / static_cast<double>(cm.total());
}

double balanced_accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  double s = 0;
  int n = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) {
    const auto r = cm.row_sum(i);
    if (r == 0) continue;
    s += static_cast<double>(cm.at(i, i)) / static_cast<double>(r);
    ++n;
  }
  return s / n;
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::vector<ClassMetrics> out;
  for (std::size_t i = 0; i < cm.size(); ++i) {
    ClassMetrics m;
    m.label = cm.classes[i];
    m.support = cm.row_sum(i);
    const double tp = static_cast<double>(cm.at(i, i));
    const auto col = cm.col_sum(i);
    m.precision = ratio(tp, static_cast<double>(col));
    m.recall = ratio(tp, static_cast<double>(m.support));
    m.f1 = (col > 0 && m.support > 0 && m.precision + m.recall > 0)
               ? 2 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    out.push_back(m);
  }
  return out;
}

double f_weighted(const ConfusionMatrix& cm) {
  const auto pc = per_class_metrics(cm);
  double s = 0;
  std::int64_t w = 0;
  for (const auto& m : pc) {
    if (m.support == 0) continue;
    s += m.f1 * static_cast<double>(m.support);
    w += m.support;
  }
  return s / static_cast<double>(w);
}

double sds_score(const ConfusionMatrix& cm, const std::string& normal_class) {
  require_nonempty(cm);
  const auto it = std::find(cm.classes.begin(), cm.classes.end(), normal_class);
  if (it == cm.classes.end()) throw_data("SDS-score: normal class '" + normal_class + "' is absent");
  const auto n = static_cast<std::size_t>(it - cm.classes.begin());
  std::int64_t bad = 0;
  for (std::size_t j = 0; j < cm.size(); ++j)
    if (j != n) bad += cm.at(n, j) + cm.at(j, n);
  return 1.0 - static_cast<double>(bad) / static_cast<double>(cm.total());
}

double cba(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  double s = 0;
  int n = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) {
    const auto m = std::max(cm.row_sum(i), cm.col_sum(i));
    if (m == 0) continue;
    s += static_cast<double>(cm.at(i, i)) / static_cast<double>(m);
    ++n;
  }
  return s / n;
}

double mcc(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const double s = static_cast<double>(cm.total());
  double c = 0, pt = 0, pp = 0, tt = 0;
  for (std::size_t k = 0; k < cm.size(); ++k) {
    const double t = static_cast<double>(cm.row_sum(k));
    const double p = static_cast<double>(cm.col_sum(k));
    c += static_cast<double>(cm.at(k, k));
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const double den = (s * s - pp) * (s * s - tt);
  if (!(den > 0)) return 0.0;
  return (c * s - pt) / std::sqrt(den);
}

MetricReport metric_report(const ConfusionMatrix& cm) {
  MetricReport r;
  r.per_class = per_class_metrics(cm);
  r.f_weighted = f_weighted(cm);
  r.sds = std::find(cm.classes.begin(), cm.classes.end(), "c") != cm.classes.end() ? sds_score(cm) : accuracy(cm);
  r.cba = cba(cm);
  r.balanced_accuracy = balanced_accuracy(cm);
  r.mcc = mcc(cm);
  r.accuracy = accuracy(cm);
  r.total = cm.total();
  return r;
}

Scorer parse_scorer(const std::string& name) {
  if (name == "f_weighted" || name == "f") return Scorer::f_weighted;
  if (name == "sds") return Scorer::sds;
  if (name == "accuracy") return Scorer::accuracy;
  throw_parameter("unknown scorer '" + name + "' (expected f_weighted, sds or accuracy)");
}

std::string to_string(Scorer s) {
  switch (s) {
    case Scorer::f_weighted: return "f_weighted";
    case Scorer::sds: return "sds";
    case Scorer::accuracy: return "accuracy";
  }
  return "?";
}

double score(const ConfusionMatrix& cm, Scorer s) {
  switch (s) {
    case Scorer::f_weighted: return f_weighted(cm);
    case Scorer::sds: return sds_score(cm);
    case Scorer::accuracy: return accuracy(cm);
  }
  return 0;
}

Json to_json(const ConfusionMatrix& cm) {
  Json j;
  j["classes"] = cm.classes;
  j["counts"] = cm.counts;
  return j;
}

ConfusionMatrix confusion_from_json(const Json& j) {
  try {
    return ConfusionMatrix(j.at("classes").get<std::vector<std::string>>(),
                           j.at("counts").get<std::vector<std::vector<std::int64_t>>>());
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed confusion matrix JSON: ") + e.what());
  }
}

Json to_json(const MetricReport& r) {
  Json j;
  j["total"] = r.total;
  j["f_weighted"] = r.f_weighted;
  j["sds"] = r.sds;
  j["cba"] = r.cba;
  j["balanced_accuracy"] = r.balanced_accuracy;
  j["mcc"] = r.mcc;
  j["accuracy"] = r.accuracy;
  Json pc = Json::array();
  for (const auto& m : r.per_class)
    pc.push_back({{"label", m.label},
                  {"precision", m.precision},
                  {"recall", m.recall},
                  {"f1", m.f1},
                  {"support", m.support}});
  j["per_class"] = pc;
  return j;
}

std::string render_text(const ConfusionMatrix& cm, const MetricReport& r) {
  std::ostringstream out;
  char buf[64];
  out << "true\\pred";
  for (const auto& c : cm.classes) {
    std::snprintf(buf, sizeof buf, "%8s", c.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-9s", cm.classes[i].c_str());
    out << buf;
    for (std::size_t j = 0; j < cm.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%8lld", static_cast<long long>(cm.at(i, j)));
      out << buf;
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof buf, "F %.2f%%  SDS %.2f%%  CBA %.2f%%  MCC %.2f%%\n", 100 * r.f_weighted,
                100 * r.sds, 100 * r.cba, 100 * r.mcc);
  out << buf;
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\pred";
  for (const auto& c : cm.classes) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out << cm.classes[i];
    for (std::size_t j = 0; j < cm.size(); ++j) out << ',' << cm.at(i, j);
    out << '\n';
  }
  return out.str();
}

}  // namespace rbc
