#include "rbc/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rbc/error.hpp"

namespace rbc {

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

int Tree::leaf_count() const {
  int n = 0;
  for (const auto& nd : nodes) n += nd.feature < 0;
  return n;
}

Json Tree::to_json() const {
  // Column layout keeps large forests compact.
  Json f = Json::array(), t = Json::array(), l = Json::array(), r = Json::array(), v = Json::array();
  for (const auto& nd : nodes) {
    f.push_back(nd.feature);
    t.push_back(nd.threshold);
    l.push_back(nd.left);
    r.push_back(nd.right);
    v.push_back(nd.feature < 0 ? Json(nd.value) : Json::array());
  }
  return Json{{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"value", v}};
}

Tree Tree::from_json(const Json& j) {
  Tree tr;
  const auto& f = j.at("feature");
  tr.nodes.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto& nd = tr.nodes[i];
    nd.feature = f[i].get<int>();
    nd.threshold = j.at("threshold")[i].get<double>();
    nd.left = j.at("left")[i].get<int>();
    nd.right = j.at("right")[i].get<int>();
    nd.value = j.at("value")[i].get<std::vector<double>>();
    const int n = static_cast<int>(f.size());
    if (nd.feature >= 0 && (nd.left <= static_cast<int>(i) || nd.right <= static_cast<int>(i) || nd.left >= n ||
                            nd.right >= n))
      throw_data("tree JSON: child index out of range");
    if (nd.feature < 0 && nd.value.empty()) throw_data("tree JSON: leaf without value");
  }
  if (tr.nodes.empty()) throw_data("tree JSON: no nodes");
  return tr;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct GiniCriterion {
  int k;
  std::vector<int> y;  // per slot
  int min_leaf;

  struct Acc {
    std::vector<double> c;
    double n = 0;
  };
  Acc make() const { return Acc{std::vector<double>(static_cast<std::size_t>(k), 0.0), 0}; }
  void clear(Acc& a) const {
    std::fill(a.c.begin(), a.c.end(), 0.0);
    a.n = 0;
  }
  void add(Acc& a, std::uint32_t s) const {
    a.c[static_cast<std::size_t>(y[s])] += 1;
    a.n += 1;
  }
  static double sq_over_n(const Acc& a) {
    double s = 0;
    for (double v : a.c) s += v * v;
    return s / a.n;
  }
  bool counts_ok(double nl, double nt) const { return nl >= min_leaf && nt - nl >= min_leaf; }
  bool children_ok(const Acc& l, const Acc& t) const { return counts_ok(l.n, t.n); }
  /// n*imp(parent) - nL*imp(L) - nR*imp(R) for Gini.
  double gain(const Acc& l, const Acc& t, double parent_term) const {
    double sl = 0, sr = 0;
    for (std::size_t c = 0; c < l.c.size(); ++c) {
      sl += l.c[c] * l.c[c];
      const double r = t.c[c] - l.c[c];
      sr += r * r;
    }
    return sl / l.n + sr / (t.n - l.n) - parent_term;
  }
  double parent_term(const Acc& t) const { return sq_over_n(t); }
  bool pure(const Acc& t) const {
    int nonzero = 0;
    for (double v : t.c) nonzero += v > 0;
    return nonzero <= 1;
  }
  std::vector<double> leaf(const Acc& t) const {
    std::vector<double> p(t.c.size());
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = t.c[c] / t.n;
    return p;
  }
  static constexpr double min_gain = kNegInf;
};

struct BoostCriterion {
  std::vector<double> g, h;  // per slot
  BoostTreeParams p;

  struct Acc {
    double g = 0, h = 0, n = 0;
  };
  Acc make() const { return {}; }
  void clear(Acc& a) const { a = {}; }
  void add(Acc& a, std::uint32_t s) const {
    a.g += g[s];
    a.h += h[s];
    a.n += 1;
  }
  double weight(double G, double H) const {
    double w = -G / (H + p.lambda);
    if (p.max_delta_step > 0) w = std::clamp(w, -p.max_delta_step, p.max_delta_step);
    return w;
  }
  /// Loss reduction achieved by the optimal (possibly clamped) leaf.
  double score(double G, double H) const {
    if (p.max_delta_step <= 0) return G * G / (H + p.lambda);
    const double w = weight(G, H);
    return -(2 * G * w + (H + p.lambda) * w * w);
  }
  bool counts_ok(double nl, double nt) const { return nl >= 1 && nt - nl >= 1; }
  bool children_ok(const Acc& l, const Acc& t) const {
    return l.n >= 1 && t.n - l.n >= 1 && l.h >= p.min_child_weight && t.h - l.h >= p.min_child_weight;
  }
  double gain(const Acc& l, const Acc& t, double parent_term) const {
    return 0.5 * (score(l.g, l.h) + score(t.g - l.g, t.h - l.h) - parent_term);
  }
  double parent_term(const Acc& t) const { return score(t.g, t.h); }
  bool pure(const Acc&) const { return false; }
  std::vector<double> leaf(const Acc& t) const { return {weight(t.g, t.h)}; }
  static constexpr double min_gain = 1e-12;
};

template <class Crit>
class Builder {
public:
  Builder(const Eigen::MatrixXd& X, std::span<const std::size_t> rows, const Crit& crit, int max_depth,
          int min_split, int max_features, bool random_thresholds, Rng* rng, std::vector<double>* importance)
      : X_(X), crit_(crit), max_depth_(max_depth), min_split_(min_split), random_thr_(random_thresholds),
        rng_(rng), importance_(importance) {
    m_ = rows.size();
    d_ = static_cast<std::size_t>(X.cols());
    max_features_ = (max_features <= 0 || static_cast<std::size_t>(max_features) >= d_)
                        ? d_
                        : static_cast<std::size_t>(max_features);
    row_of_.assign(rows.begin(), rows.end());
    order_.resize(d_ * m_);
    vals_.resize(d_ * m_);
    std::vector<std::uint32_t> idx(m_);
    for (std::size_t f = 0; f < d_; ++f) {
      std::iota(idx.begin(), idx.end(), 0u);
      const auto col = static_cast<Eigen::Index>(f);
      std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return X_(static_cast<Eigen::Index>(row_of_[a]), col) < X_(static_cast<Eigen::Index>(row_of_[b]), col);
      });
      for (std::size_t i = 0; i < m_; ++i) {
        order_[f * m_ + i] = idx[i];
        vals_[f * m_ + i] = X_(static_cast<Eigen::Index>(row_of_[idx[i]]), col);
      }
    }
    goes_left_.assign(m_, 0);
    tmp_order_.resize(m_);
    tmp_vals_.resize(m_);
    features_.resize(d_);
  }

  Tree build() {
    Tree tree;
    if (m_ == 0) throw_data("cannot grow a tree on zero rows");
    struct Task {
      int node;
      std::size_t b, e;
      int depth;
    };
    tree.nodes.emplace_back();
    std::vector<Task> stack{{0, 0, m_, 0}};
    auto total = crit_.make();
    auto left = crit_.make();
    while (!stack.empty()) {
      const Task t = stack.back();
      stack.pop_back();
      crit_.clear(total);
      for (std::size_t i = t.b; i < t.e; ++i) crit_.add(total, order_[i]);
      auto& node = tree.nodes[static_cast<std::size_t>(t.node)];
      node.value = crit_.leaf(total);
      const std::size_t n = t.e - t.b;
      if ((max_depth_ >= 0 && t.depth >= max_depth_) || n < static_cast<std::size_t>(min_split_) ||
          crit_.pure(total))
        continue;

      const Split s = best_split(t.b, t.e, total, left);
      if (s.feature < 0) continue;
      if (importance_) (*importance_)[static_cast<std::size_t>(s.feature)] += s.gain;
      const std::size_t nl = partition(t.b, t.e, s.feature, s.threshold);
      const int li = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& nd = tree.nodes[static_cast<std::size_t>(t.node)];
      nd.feature = s.feature;
      nd.threshold = s.threshold;
      nd.left = li;
      nd.right = li + 1;
      nd.value.clear();
      stack.push_back({li + 1, t.b + nl, t.e, t.depth + 1});
      stack.push_back({li, t.b, t.b + nl, t.depth + 1});
    }
    return tree;
  }

private:
  struct Split {
    int feature = -1;
    double threshold = 0;
    double gain = kNegInf;
  };

  // Up to max_features non-constant features, ascending. Draws in a random
  // order and skips constants, like sampling until enough usable ones turn up.
  std::size_t choose_features(std::size_t b, std::size_t e) {
    const auto constant = [&](std::size_t f) { return vals_[f * m_ + b] == vals_[f * m_ + e - 1]; };
    std::size_t k = 0;
    if (max_features_ >= d_) {
      for (std::size_t f = 0; f < d_; ++f)
        if (!constant(f)) features_[k++] = f;
      return k;
    }
    std::vector<std::size_t> perm(d_);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 0; i < d_ && k < max_features_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_->below(d_ - i));
      std::swap(perm[i], perm[j]);
      if (!constant(perm[i])) features_[k++] = perm[i];
    }
    std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(k));
    return k;
  }

  Split best_split(std::size_t b, std::size_t e, const typename Crit::Acc& total, typename Crit::Acc& left) {
    Split best;
    const double parent = crit_.parent_term(total);
    const std::size_t nf = choose_features(b, e);
    const double nt = static_cast<double>(e - b);
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const std::size_t f = features_[fi];
      const std::uint32_t* ord = &order_[f * m_];
      const double* v = &vals_[f * m_];
      crit_.clear(left);
      if (random_thr_) {
        const double lo = v[b], hi = v[e - 1];
        double thr = rng_->uniform(lo, hi);
        if (!(thr < hi)) thr = lo;
        std::size_t i = b;
        while (i < e && v[i] <= thr) crit_.add(left, ord[i++]);
        if (!crit_.children_ok(left, total)) continue;
        const double g = crit_.gain(left, total, parent);
        if (g > best.gain) best = {static_cast<int>(f), thr, g};
        continue;
      }
      for (std::size_t i = b; i + 1 < e; ++i) {
        crit_.add(left, ord[i]);
        if (!(v[i] < v[i + 1])) continue;
        if (!crit_.counts_ok(static_cast<double>(i + 1 - b), nt)) continue;
        if (!crit_.children_ok(left, total)) continue;
        const double g = crit_.gain(left, total, parent);
        if (g > best.gain) {
          double thr = 0.5 * (v[i] + v[i + 1]);
          if (!(thr < v[i + 1])) thr = v[i];
          best = {static_cast<int>(f), thr, g};
        }
      }
    }
    if (best.feature >= 0 && !(best.gain > Crit::min_gain)) best.feature = -1;
    return best;
  }

  std::size_t partition(std::size_t b, std::size_t e, int feature, double thr) {
    const auto f0 = static_cast<std::size_t>(feature);
    std::size_t nl = 0;
    for (std::size_t i = b; i < e; ++i) {
      const bool l = vals_[f0 * m_ + i] <= thr;
      goes_left_[order_[f0 * m_ + i]] = l;
      nl += l;
    }
    for (std::size_t f = 0; f < d_; ++f) {
      std::uint32_t* ord = &order_[f * m_];
      double* v = &vals_[f * m_];
      std::size_t li = b, ri = 0;
      for (std::size_t i = b; i < e; ++i) {
        if (goes_left_[ord[i]]) {
          ord[li] = ord[i];
          v[li++] = v[i];
        } else {
          tmp_order_[ri] = ord[i];
          tmp_vals_[ri++] = v[i];
        }
      }
      std::copy(tmp_order_.begin(), tmp_order_.begin() + static_cast<std::ptrdiff_t>(ri), ord + li);
      std::copy(tmp_vals_.begin(), tmp_vals_.begin() + static_cast<std::ptrdiff_t>(ri), v + li);
    }
    return nl;
  }

  const Eigen::MatrixXd& X_;
  const Crit& crit_;
  int max_depth_;
  int min_split_;
  bool random_thr_;
  Rng* rng_;
  std::vector<double>* importance_;
  std::size_t m_ = 0, d_ = 0, max_features_ = 0;
  std::vector<std::size_t> row_of_;
  std::vector<std::uint32_t> order_;
  std::vector<double> vals_;
  std::vector<char> goes_left_;
  std::vector<std::uint32_t> tmp_order_;
  std::vector<double> tmp_vals_;
  std::vector<std::size_t> features_;
};

void check_rows(const Eigen::MatrixXd& X, std::span<const std::size_t> rows) {
  if (rows.empty()) throw_data("tree: no training rows");
  for (auto r : rows)
    if (r >= static_cast<std::size_t>(X.rows())) throw_parameter("tree: row index out of range");
}

}  // namespace

Tree build_classification_tree(const Eigen::MatrixXd& X, std::span<const int> y, int n_classes,
                               std::span<const std::size_t> rows, const TreeParams& p, Rng& rng,
                               std::vector<double>* importance) {
  check_rows(X, rows);
  if (p.min_samples_leaf < 1 || p.min_samples_split < 2) throw_parameter("tree: invalid stopping parameters");
  GiniCriterion crit{n_classes, {}, p.min_samples_leaf};
  crit.y.reserve(rows.size());
  for (auto r : rows) {
    if (y[r] < 0 || y[r] >= n_classes) throw_data("tree: label out of range");
    crit.y.push_back(y[r]);
  }
  if (importance) importance->assign(static_cast<std::size_t>(X.cols()), 0.0);
  Builder<GiniCriterion> b(X, rows, crit, p.max_depth, p.min_samples_split, p.max_features, p.random_thresholds,
                           &rng, importance);
  return b.build();
}

Tree build_boost_tree(const Eigen::MatrixXd& X, std::span<const double> grad, std::span<const double> hess,
                      std::span<const std::size_t> rows, const BoostTreeParams& p, std::vector<double>* importance) {
  check_rows(X, rows);
  BoostCriterion crit;
  crit.p = p;
  crit.g.reserve(rows.size());
  crit.h.reserve(rows.size());
  for (auto r : rows) {
    crit.g.push_back(grad[r]);
    crit.h.push_back(hess[r]);
  }
  if (importance) importance->assign(static_cast<std::size_t>(X.cols()), 0.0);
  Builder<BoostCriterion> b(X, rows, crit, p.max_depth, 2, 0, false, nullptr, importance);
  return b.build();
}

}  // namespace rbc
