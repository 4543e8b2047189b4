#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "xdrmob/error.hpp"

namespace xdrmob {

/// Dense row-major matrix of observations.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Column-wise standardization; constant columns become all zeros.
inline Matrix zscore(const Matrix& x) {
  Matrix z(x.rows(), x.cols());
  const double n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t r = 0; r < x.rows(); ++r) z(r, c) = sd > 0.0 ? (x(r, c) - mean) / sd : 0.0;
  }
  return z;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline std::size_t count_distinct_rows(const Matrix& x) {
  std::set<std::vector<double>> rows;
  for (std::size_t r = 0; r < x.rows(); ++r) rows.emplace(x.row(r).begin(), x.row(r).end());
  return rows.size();
}

struct Merge {
  std::size_t a = 0;  // representative observation of each merged cluster
  std::size_t b = 0;
  double height = 0.0;
};

/// Ward agglomerative clustering by nearest-neighbour chain. Cluster distance
/// is the increase in within-cluster sum of squares,
/// |A||B|/(|A|+|B|) * ||c_A - c_B||^2, evaluated from centroids so memory
/// stays O(n). Merges are returned sorted by height.
inline std::vector<Merge> ward_linkage(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  std::vector<std::vector<double>> centroid(n);
  std::vector<double> size(n, 1.0);
  std::vector<std::size_t> rep(n);
  std::vector<char> active(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    centroid[i].assign(x.row(i).begin(), x.row(i).end());
    rep[i] = i;
  }
  auto dist = [&](std::size_t i, std::size_t j) {
    return size[i] * size[j] / (size[i] + size[j]) * squared_distance(centroid[i], centroid[j]);
  };

  std::vector<Merge> merges;
  merges.reserve(n > 0 ? n - 1 : 0);
  std::vector<std::size_t> chain;
  std::size_t remaining = n;
  std::size_t next_start = 0;
  while (remaining > 1) {
    if (chain.empty()) {
      while (!active[next_start]) ++next_start;
      chain.push_back(next_start);
    }
    const std::size_t a = chain.back();
    const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    if (prev != n) {
      best = prev;
      best_d = dist(a, prev);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j] || j == a || j == prev) continue;
      const double dj = dist(a, j);
      if (dj < best_d) {
        best_d = dj;
        best = j;
      }
    }
    if (best == prev) {
      chain.pop_back();
      chain.pop_back();
      const std::size_t keep = std::min(a, best);
      const std::size_t drop = std::max(a, best);
      merges.push_back({rep[a], rep[best], best_d});
      const double sa = size[keep], sb = size[drop];
      for (std::size_t c = 0; c < d; ++c)
        centroid[keep][c] = (sa * centroid[keep][c] + sb * centroid[drop][c]) / (sa + sb);
      size[keep] = sa + sb;
      rep[keep] = std::min(rep[a], rep[best]);
      active[drop] = 0;
      --remaining;
    } else {
      chain.push_back(best);
    }
  }
  std::stable_sort(merges.begin(), merges.end(), [](const Merge& l, const Merge& r) { return l.height < r.height; });
  return merges;
}

/// Applies the n - k lowest merges and returns labels 0..k-1, numbered by
/// first appearance.
inline std::vector<int> cut_tree(std::size_t n, std::span<const Merge> merges, std::size_t k) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const std::size_t apply = n > k ? n - k : 0;
  for (std::size_t m = 0; m < apply && m < merges.size(); ++m) {
    const auto ra = find(merges[m].a), rb = find(merges[m].b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> labels(n, -1);
  std::vector<int> root_label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return labels;
}

inline Matrix cluster_centroids(const Matrix& x, std::span<const int> labels, std::size_t k) {
  Matrix c(k, x.cols());
  std::vector<double> count(k, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto l = static_cast<std::size_t>(labels[r]);
    count[l] += 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j) c(l, j) += x(r, j);
  }
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (count[l] > 0) c(l, j) /= count[l];
  return c;
}

inline std::size_t nearest_row(const Matrix& centers, std::span<const double> point) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double dd = squared_distance(centers.row(c), point);
    if (dd < best_d) {
      best_d = dd;
      best = c;
    }
  }
  return best;
}

struct KMeansResult {
  std::vector<int> labels;
  Matrix centroids;
  double inertia = 0.0;
  std::vector<double> history;  // inertia after each Lloyd iteration of the winning run
};

namespace detail {

inline Matrix kmeans_pp_init(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  auto copy_row = [&](std::size_t dst, std::size_t src) {
    std::copy(x.row(src).begin(), x.row(src).end(), centers.row(dst).begin());
  };
  copy_row(0, first(rng));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x.row(i), centers.row(c - 1)));
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> dist(d2.begin(), d2.end());
      pick = dist(rng);
    } else {
      pick = first(rng);
    }
    copy_row(c, pick);
  }
  return centers;
}

inline KMeansResult lloyd(const Matrix& x, Matrix centers, std::size_t max_iter) {
  const std::size_t n = x.rows();
  const std::size_t k = centers.rows();
  KMeansResult r;
  r.labels.assign(n, -1);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int l = static_cast<int>(nearest_row(centers, x.row(i)));
      if (l != r.labels[i]) {
        r.labels[i] = l;
        changed = true;
      }
    }
    std::vector<double> count(k, 0.0);
    Matrix sum(k, x.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = static_cast<std::size_t>(r.labels[i]);
      count[l] += 1.0;
      for (std::size_t j = 0; j < x.cols(); ++j) sum(l, j) += x(i, j);
    }
    for (std::size_t l = 0; l < k; ++l)
      if (count[l] > 0)
        for (std::size_t j = 0; j < x.cols(); ++j) centers(l, j) = sum(l, j) / count[l];
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += squared_distance(x.row(i), centers.row(static_cast<std::size_t>(r.labels[i])));
    r.history.push_back(inertia);
    if (!changed) break;
  }
  r.inertia = r.history.empty() ? 0.0 : r.history.back();
  r.centroids = std::move(centers);
  return r;
}

}  // namespace detail

/// k-means with k-means++ seeding; keeps the restart with the lowest inertia
/// (earliest restart on ties).
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed,
                           std::size_t max_iter = 300) {
  if (count_distinct_rows(x) < k)
    throw DegeneratePopulationError("k-means: fewer than " + std::to_string(k) + " distinct points");
  KMeansResult best;
  bool have = false;
  for (std::size_t run = 0; run < std::max<std::size_t>(restarts, 1); ++run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run)};
    std::mt19937_64 rng(seq);
    auto r = detail::lloyd(x, detail::kmeans_pp_init(x, k, rng), max_iter);
    if (!have || r.inertia < best.inertia) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace xdrmob
