#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rbc/json.hpp"

namespace rbc {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::int64_t>> counts;

  ConfusionMatrix() = default;
  ConfusionMatrix(std::vector<std::string> classes, std::vector<std::vector<std::int64_t>> counts);

  std::size_t size() const { return classes.size(); }
  std::int64_t at(std::size_t t, std::size_t p) const { return counts[t][p]; }
  std::int64_t total() const;
  std::int64_t row_sum(std::size_t i) const;
  std::int64_t col_sum(std::size_t j) const;
  /// Throws Error(data) for a ragged or negative matrix.
  void validate() const;
};

/// Labels are indices into `classes`.
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred,
                          const std::vector<std::string>& classes);
ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> pred,
                          const std::vector<std::string>& classes);

double accuracy(const ConfusionMatrix& cm);
double balanced_accuracy(const ConfusionMatrix& cm);

/// Support-weighted mean of per-class F1; classes with no true members are
/// excluded, and an undefined precision or recall makes that class's F1 zero.
double f_weighted(const ConfusionMatrix& cm);

/// 1 - (normal->deformed + deformed->normal) / total. Confusions among the
/// deformed classes are not counted.
double sds_score(const ConfusionMatrix& cm, const std::string& normal_class = "c");

/// Mosley class balance accuracy: mean of diag / max(row, col). Classes with
/// empty row and column are skipped.
double cba(const ConfusionMatrix& cm);

/// Gorodkin's R_K; 0 when the denominator vanishes.
double mcc(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::string label;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
};

struct MetricReport {
  std::vector<ClassMetrics> per_class;
  double f_weighted = 0;
  double sds = 0;
  double cba = 0;
  double balanced_accuracy = 0;
  double mcc = 0;
  double accuracy = 0;
  std::int64_t total = 0;
};

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);
MetricReport metric_report(const ConfusionMatrix& cm);

enum class Scorer { f_weighted, sds, accuracy };
Scorer parse_scorer(const std::string& name);
std::string to_string(Scorer s);
double score(const ConfusionMatrix& cm, Scorer s);

Json to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const Json& j);
Json to_json(const MetricReport& r);

/// Fixed-width table: the matrix followed by the four headline metrics in %.
std::string render_text(const ConfusionMatrix& cm, const MetricReport& r);
/// `true\pred,c,e,o` header then one row per true class.
std::string confusion_csv(const ConfusionMatrix& cm);

}  // namespace rbc
