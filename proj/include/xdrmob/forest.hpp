#pragma once

// Random forest of CART classification trees, used only for its mean
// decrease in Gini impurity per feature.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "xdrmob/clustering.hpp"
#include "xdrmob/error.hpp"
#include "xdrmob/parallel.hpp"

namespace xdrmob {

struct ForestOptions {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t max_features = 0;  // 0 -> floor(sqrt(n_features))
  std::size_t min_samples_split = 2;
  std::uint64_t seed = 42;
  unsigned threads = 1;
};

namespace detail {

inline double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, std::size_t n_classes, const ForestOptions& opt,
              std::mt19937_64& rng)
      : x_(x), y_(y), k_(n_classes), opt_(opt), rng_(rng), importance_(x.cols(), 0.0) {
    mtry_ = opt.max_features > 0 ? std::min(opt.max_features, x.cols())
                                 : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(x.cols()))));
    features_.resize(x.cols());
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::vector<double> grow(std::vector<std::size_t> sample) {
    total_ = static_cast<double>(sample.size());
    split(sample, 0);
    return importance_;
  }

 private:
  void split(std::vector<std::size_t>& idx, std::size_t depth) {
    const double n = static_cast<double>(idx.size());
    std::vector<double> counts(k_, 0.0);
    for (auto i : idx) counts[static_cast<std::size_t>(y_[i])] += 1.0;
    const double node_gini = gini(counts, n);
    if (depth >= opt_.max_depth || idx.size() < opt_.min_samples_split || node_gini <= 0.0) return;

    // Partial Fisher-Yates draws mtry candidate features without replacement.
    for (std::size_t f = 0; f < mtry_; ++f) {
      std::uniform_int_distribution<std::size_t> pick(f, features_.size() - 1);
      std::swap(features_[f], features_[pick(rng_)]);
    }

    double best_gain = 0.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(idx);
    std::vector<double> left(k_), right(k_);
    for (std::size_t fi = 0; fi < mtry_; ++fi) {
      const std::size_t feat = features_[fi];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x_(a, feat) < x_(b, feat); });
      std::fill(left.begin(), left.end(), 0.0);
      right = counts;
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        const auto cls = static_cast<std::size_t>(y_[order[p]]);
        left[cls] += 1.0;
        right[cls] -= 1.0;
        const double v = x_(order[p], feat);
        const double v_next = x_(order[p + 1], feat);
        if (v == v_next) continue;
        const double nl = static_cast<double>(p + 1);
        const double nr = n - nl;
        const double gain = node_gini - (nl / n) * gini(left, nl) - (nr / n) * gini(right, nr);
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = feat;
          best_threshold = 0.5 * (v + v_next);
        }
      }
    }
    if (best_gain <= 0.0) return;

    importance_[best_feature] += (n / total_) * best_gain;
    std::vector<std::size_t> lo, hi;
    for (auto i : idx) (x_(i, best_feature) <= best_threshold ? lo : hi).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    split(lo, depth + 1);
    split(hi, depth + 1);
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::size_t k_;
  const ForestOptions& opt_;
  std::mt19937_64& rng_;
  std::size_t mtry_ = 1;
  double total_ = 0.0;
  std::vector<std::size_t> features_;
  std::vector<double> importance_;
};

}  // namespace detail

/// Mean decrease in Gini impurity per feature: per-tree importances are
/// normalized, averaged over trees, then normalized again to sum to 1.
inline std::vector<double> gini_importance(const Matrix& x, std::span<const int> y, const ForestOptions& opt = {}) {
  if (x.rows() != y.size()) throw InputError("feature importance: label count does not match rows");
  if (x.rows() == 0) throw InputError("feature importance: no samples");
  const int max_label = *std::max_element(y.begin(), y.end());
  if (*std::min_element(y.begin(), y.end()) < 0) throw InputError("feature importance: negative label");
  const auto n_classes = static_cast<std::size_t>(max_label) + 1;
  std::vector<std::size_t> distinct(n_classes, 0);
  for (int l : y) distinct[static_cast<std::size_t>(l)] = 1;
  if (std::accumulate(distinct.begin(), distinct.end(), std::size_t{0}) < 2)
    throw InputError("feature importance: labels contain a single class");

  std::vector<std::vector<double>> per_tree(opt.n_trees);
  parallel_for(opt.n_trees, opt.threads, [&](std::size_t t) {
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                      static_cast<std::uint32_t>(t), 0x7265u};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> draw(0, x.rows() - 1);
    std::vector<std::size_t> sample(x.rows());
    for (auto& s : sample) s = draw(rng);
    detail::TreeBuilder builder(x, y, n_classes, opt, rng);
    per_tree[t] = builder.grow(std::move(sample));
  });

  std::vector<double> total(x.cols(), 0.0);
  for (auto& imp : per_tree) {
    const double s = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (s <= 0.0) continue;
    for (std::size_t f = 0; f < imp.size(); ++f) total[f] += imp[f] / s;
  }
  const double s = std::accumulate(total.begin(), total.end(), 0.0);
  if (s <= 0.0) throw InputError("feature importance: no tree found an informative split");
  for (auto& v : total) v /= s;
  return total;
}

}  // namespace xdrmob
