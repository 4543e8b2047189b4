#pragma once

// Lempel-Ziv style (Kontoyiannis) entropy-rate estimate of a symbol sequence
// and the Fano upper bound on next-symbol predictability derived from it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace xdrmob {

/// lengths[i] = length of the shortest substring starting at i that does not
/// occur inside s[0, i). A match that runs to the end of the sequence yields
/// its length + 1. lengths[0] = 1.
///
/// O(n^2) time, O(n) memory: lcp[d] holds the common-prefix length of the
/// suffixes starting at i - d and i, updated in place while i walks backwards.
template <class T>
std::vector<std::size_t> match_lengths(std::span<const T> s) {
  const std::size_t n = s.size();
  std::vector<std::size_t> lengths(n, 1);
  std::vector<std::size_t> lcp(n + 1, 0);
  for (std::size_t i = n; i-- > 0;) {
    std::size_t best = 0;
    for (std::size_t d = 1; d <= i; ++d) {
      lcp[d] = s[i - d] == s[i] ? lcp[d] + 1 : 0;
      // The earlier occurrence must end before position i.
      best = std::max(best, std::min(lcp[d], d));
    }
    lengths[i] = best + 1;
  }
  return lengths;
}

/// Estimated entropy rate in bits: n log2 n / sum of match lengths.
template <class T>
double entropy_rate(std::span<const T> s) {
  const std::size_t n = s.size();
  if (n < 2) return 0.0;
  const auto lengths = match_lengths(s);
  double total = 0.0;
  for (auto l : lengths) total += static_cast<double>(l);
  const double dn = static_cast<double>(n);
  return dn * std::log2(dn) / total;
}

inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// Solves entropy = H(P) + (1 - P) log2(N - 1) for P in [1/N, 1] by bisection.
/// The left side decreases monotonically from log2 N to 0 on that interval.
inline double fano_predictability(double entropy, std::size_t n_symbols, double tol = 1e-13) {
  if (n_symbols <= 1) return 1.0;
  const double n = static_cast<double>(n_symbols);
  const double log_rest = std::log2(n - 1.0);
  auto f = [&](double p) { return binary_entropy(p) + (1.0 - p) * log_rest; };
  double lo = 1.0 / n;
  double hi = 1.0;
  // f(1/n) equals log2(n) exactly; rounding in f would otherwise miss the flat maximum.
  if (entropy >= std::log2(n) || entropy >= f(lo)) return lo;
  if (entropy <= 0.0) return 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > entropy) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace xdrmob
