#pragma once

// Published confusion matrices and the scores printed next to them.
// NaN marks a score that is not reported for that matrix.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace golden {

inline constexpr double kNone = NAN;

struct Entry {
  const char* name;
  std::vector<std::vector<std::int64_t>> counts;  // rows true c,e,(o)
  double sds;  // percent
  double f;    // percent
  double cba;  // percent
  double mcc;  // percent
};

inline std::vector<std::string> classes_for(const Entry& e) {
  return e.counts.size() == 2 ? std::vector<std::string>{"c", "e"} : std::vector<std::string>{"c", "e", "o"};
}

/// Fine-tuned test-split matrices and their scores.
inline const std::vector<Entry>& table4() {
  static const std::vector<Entry> v = {
      {"RF fine-tuned", {{490, 7, 2}, {9, 197, 4}, {26, 6, 68}}, 94.56, 93.11, kNone, kNone},
      {"DT fine-tuned", {{481, 8, 10}, {6, 194, 10}, {21, 12, 67}}, 94.44, 91.62, kNone, kNone},
  };
  return v;
}

/// Full-data baseline matrices and the baseline row of the summary table.
inline const std::vector<Entry>& baselines() {
  static const std::vector<Entry> v = {
      {"SVM baseline", {{1496, 44, 123}, {83, 596, 21}, {94, 19, 219}}, 87.24, 85.97, kNone, kNone},
      {"DT baseline", {{1535, 47, 81}, {69, 564, 67}, {72, 32, 228}}, 90.02, 86.49, kNone, kNone},
      {"RF baseline", {{1580, 38, 45}, {52, 636, 12}, {91, 27, 214}}, 91.61, 89.91, kNone, kNone},
      {"ET baseline", {{1556, 45, 62}, {72, 620, 8}, {97, 29, 206}}, 89.76, 89.54, kNone, kNone},
      {"GB baseline", {{1569, 41, 53}, {60, 628, 12}, {91, 26, 215}}, 90.91, 89.75, kNone, kNone},
      {"kNN baseline", {{1542, 39, 82}, {109, 577, 14}, {112, 31, 189}}, 87.31, 85.35, kNone, kNone},
      {"MLP baseline", {{1485, 48, 130}, {62, 598, 40}, {92, 29, 211}}, 87.68, 85.39, kNone, kNone},
  };
  return v;
}

/// Feature selection and projection matrices. Where the SDS- and F-optimal
/// runs produced different matrices they are listed separately, each with
/// only the score it was selected for.
inline const std::vector<Entry>& selection() {
  static const std::vector<Entry> v = {
      {"RF 15 features (SDS run)", {{488, 7, 4}, {7, 194, 9}, {22, 4, 74}}, 95.05, kNone, kNone, kNone},
      {"RF 15 features (F run)", {{489, 7, 3}, {8, 194, 8}, {22, 3, 75}}, kNone, 93.36, kNone, kNone},
      {"DT 20 features", {{483, 13, 3}, {8, 199, 3}, {24, 9, 67}}, 94.07, 92.37, kNone, kNone},
      {"RF PCA", {{485, 9, 5}, {14, 194, 2}, {34, 12, 54}}, 92.34, 90.06, kNone, kNone},
      {"DT PCA", {{483, 9, 7}, {25, 172, 13}, {36, 11, 53}}, 90.48, 87.02, kNone, kNone},
      {"RF LDA", {{478, 9, 12}, {12, 191, 7}, {22, 6, 72}}, 93.20, 91.55, kNone, kNone},
      {"DT LDA", {{482, 9, 8}, {17, 187, 6}, {21, 7, 72}}, 93.20, 91.49, kNone, kNone},
      {"SVM 15 features", {{490, 6, 3}, {9, 195, 6}, {25, 5, 70}}, 94.68, 93.15, kNone, kNone},
      {"DT 15 features", {{490, 5, 4}, {8, 197, 5}, {26, 10, 64}}, 94.68, 92.55, kNone, kNone},
      {"ET 15 features", {{487, 8, 4}, {7, 198, 5}, {27, 5, 68}}, 94.31, 92.88, kNone, kNone},
      {"GB 15 features", {{488, 6, 5}, {8, 194, 8}, {20, 5, 75}}, 95.18, 93.50, kNone, kNone},
      {"kNN 15 features", {{489, 8, 2}, {12, 193, 5}, {30, 7, 63}}, 93.57, 91.77, kNone, kNone},
      {"MLP 15 features", {{485, 6, 8}, {9, 194, 7}, {19, 5, 76}}, 94.81, 93.14, kNone, kNone},
  };
  return v;
}

/// Three-class comparison with the rule baseline.
inline const std::vector<Entry>& three_class() {
  static const std::vector<Entry> v = {
      {"GB 3-class", {{488, 6, 5}, {8, 194, 8}, {20, 5, 75}}, 95.18, 93.50, 88.39, 88.43},
      {"RF 3-class", {{488, 7, 4}, {7, 194, 9}, {22, 4, 74}}, 95.05, 93.36, 88.06, 88.20},
      {"Asakura 3-class", {{199, 259, 41}, {0, 102, 108}, {9, 67, 24}}, 61.80, 45.33, 37.48, 35.43},
  };
  return v;
}

/// Two-class comparison with the circularity and eccentricity rules.
inline const std::vector<Entry>& two_class() {
  static const std::vector<Entry> v = {
      {"GB 2-class", {{484, 15}, {28, 282}}, 94.68, 94.67, 93.98, 88.72},
      {"RF 2-class", {{484, 15}, {30, 280}}, 94.44, 94.42, 93.66, 88.19},
      {"Gonzalez-Hidalgo 2-class", {{189, 310}, {100, 210}}, 49.32, 48.97, 52.81, 5.70},
      {"Acharya 2-class", {{348, 151}, {23, 287}}, 78.49, 78.76, 81.16, 60.80},
  };
  return v;
}

inline std::vector<Entry> all() {
  std::vector<Entry> v;
  for (const auto* t : {&table4(), &baselines(), &selection(), &three_class(), &two_class()})
    v.insert(v.end(), t->begin(), t->end());
  return v;
}

}  // namespace golden
