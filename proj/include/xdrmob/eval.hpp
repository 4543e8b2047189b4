#pragma once

// Evaluation of the three use cases: prediction accuracy of one behavioral
// half given the other, discrimination between true and shuffled pairings,
// and matching traffic sequences back to their mobility sequences.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "xdrmob/error.hpp"
#include "xdrmob/markov.hpp"
#include "xdrmob/parallel.hpp"
#include "xdrmob/seed.hpp"
#include "xdrmob/step.hpp"

namespace xdrmob {

inline constexpr std::size_t kDefaultBins = 64;
inline constexpr std::size_t kDefaultRepeats = 10;

struct Histogram {
  std::vector<double> mass;  // normalized frequencies over equal-width bins of [0, 1]
  std::size_t count = 0;
};

inline std::size_t histogram_bin(double v, std::size_t bins) {
  if (!(v >= 0.0 && v <= 1.0)) throw InputError("histogram value outside [0, 1]");
  return std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
}

inline Histogram likelihood_histogram(std::span<const double> values, std::size_t bins = kDefaultBins) {
  if (bins == 0) throw InputError("histogram needs at least one bin");
  if (values.empty()) throw InputError("histogram of an empty sample");
  Histogram h;
  h.mass.assign(bins, 0.0);
  for (double v : values) h.mass[histogram_bin(v, bins)] += 1.0;
  for (auto& m : h.mass) m /= static_cast<double>(values.size());
  h.count = values.size();
  return h;
}

inline double hellinger(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("hellinger: histograms have different binning");
  double s = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const double d = std::sqrt(p[b]) - std::sqrt(q[b]);
    s += d * d;
  }
  return std::min(1.0, std::sqrt(s) / std::sqrt(2.0));
}

inline double hellinger(const Histogram& p, const Histogram& q) { return hellinger(p.mass, q.mass); }

/// Uniformly random derangement: pairing[u] != u for every u.
inline std::vector<std::size_t> shuffle_pairing(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw InputError("a derangement needs at least 2 users");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> p(n);
  for (;;) {
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) ok = p[i] != i;
    if (ok) return p;
  }
}

// ---------------------------------------------------------------------------
// Use case 1: prediction

struct StepAccuracy {
  double overall = 0.0;
  double trc = 0.0;
  double disc = 0.0;
  double rep = 0.0;
  double sta = 0.0;
};

inline StepAccuracy step_accuracy(std::span<const RefinedBehavior> truth, std::span<const RefinedBehavior> sampled) {
  if (truth.size() != sampled.size()) throw InputError("accuracy: sequences differ in length");
  if (truth.empty()) throw InputError("accuracy: empty sequence");
  StepAccuracy a;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& t = truth[i];
    const auto& s = sampled[i];
    a.overall += t == s;
    a.trc += t.trc == s.trc;
    a.disc += t.disc == s.disc;
    a.rep += t.rep == s.rep;
    a.sta += t.sta == s.sta;
  }
  const double n = static_cast<double>(truth.size());
  a.overall /= n;
  a.trc /= n;
  a.disc /= n;
  a.rep /= n;
  a.sta /= n;
  return a;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

inline MeanStd mean_std(std::span<const double> v) {
  MeanStd m;
  if (v.empty()) return m;
  const double n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(var / n);
  return m;
}

struct AccuracySummary {
  MeanStd overall, trc, disc, rep, sta;
};

inline AccuracySummary summarize(std::span<const StepAccuracy> a) {
  auto field = [&](double StepAccuracy::*f) {
    std::vector<double> v;
    v.reserve(a.size());
    for (const auto& x : a) v.push_back(x.*f);
    return mean_std(v);
  };
  return {field(&StepAccuracy::overall), field(&StepAccuracy::trc), field(&StepAccuracy::disc),
          field(&StepAccuracy::rep), field(&StepAccuracy::sta)};
}

/// One user's accuracy against R sampled sequences: mean and spread over the
/// repeats.
inline AccuracySummary prediction_accuracy(std::span<const RefinedBehavior> truth,
                                           std::span<const std::vector<RefinedBehavior>> samples) {
  std::vector<StepAccuracy> per;
  for (const auto& s : samples) per.push_back(step_accuracy(truth, s));
  return summarize(per);
}

struct PredictionReport {
  std::vector<AccuracySummary> per_user;  // over repeats
  AccuracySummary across_users;           // of the per-user means
  std::array<std::size_t, 4> fallback_counts{};
};

/// Samples every test sequence `repeats` times with the unknown half hidden
/// and scores it against the truth.
template <class Corpus>
PredictionReport run_prediction(const MarkovModel& model, const Corpus& test, Direction dir,
                                std::size_t repeats = kDefaultRepeats, std::uint64_t seed = 42, unsigned threads = 1) {
  if (repeats == 0) throw InputError("prediction needs at least one repeat");
  const ConditionalSampler sampler(model, dir);
  PredictionReport r;
  r.per_user.resize(test.size());
  std::vector<std::array<std::size_t, 4>> fallbacks(test.size());
  parallel_for(test.size(), threads, [&](std::size_t u) {
    const std::span<const RefinedBehavior> truth(test[u]);
    std::vector<std::vector<RefinedBehavior>> samples;
    for (std::size_t k = 0; k < repeats; ++k) {
      auto s = sampler.sample(truth, derive_seed(seed, u, k));
      for (std::size_t l = 0; l < 4; ++l) fallbacks[u][l] += s.fallback_counts[l];
      samples.push_back(std::move(s.sequence));
    }
    r.per_user[u] = prediction_accuracy(truth, samples);
  });
  std::vector<StepAccuracy> means;
  for (const auto& p : r.per_user) means.push_back({p.overall.mean, p.trc.mean, p.disc.mean, p.rep.mean, p.sta.mean});
  r.across_users = summarize(means);
  for (const auto& f : fallbacks)
    for (std::size_t l = 0; l < 4; ++l) r.fallback_counts[l] += f[l];
  return r;
}

// ---------------------------------------------------------------------------
// Use case 2: discrimination

struct DiscriminationReport {
  std::vector<double> regular;   // pi of each user's own pairing
  std::vector<double> shuffled;  // pi under a derangement
  std::vector<std::size_t> pairing;
  std::size_t skipped = 0;  // deranged pairs whose time tokens differ
  Histogram regular_hist, shuffled_hist;
  double hellinger = 0.0;
};

/// Scores every user's true traffic/mobility pairing and a shuffled one and
/// compares the two likelihood distributions.
template <class Corpus>
DiscriminationReport run_discrimination(const MarkovModel& model, const Corpus& test, std::uint64_t seed = 42,
                                        std::size_t bins = kDefaultBins) {
  DiscriminationReport r;
  r.pairing = shuffle_pairing(test.size(), seed);
  const TimeMode tm = model.config().time_mode;
  for (std::size_t u = 0; u < test.size(); ++u) {
    const std::span<const RefinedBehavior> own(test[u]);
    if (own.size() < 2) throw InputError("discrimination: sequence shorter than 2 steps");
    r.regular.push_back(sequence_likelihood(model, own).pi);
    const std::span<const RefinedBehavior> other(test[r.pairing[u]]);
    bool aligned = own.size() == other.size();
    for (std::size_t i = 0; aligned && i < own.size(); ++i)
      aligned = time_token(own[i].slot, tm) == time_token(other[i].slot, tm);
    if (!aligned) {
      ++r.skipped;
      continue;
    }
    r.shuffled.push_back(sequence_likelihood(model, zip_halves(own, other)).pi);
  }
  if (r.shuffled.empty()) throw InputError("discrimination: no shuffled pair shares time tokens");
  r.regular_hist = likelihood_histogram(r.regular, bins);
  r.shuffled_hist = likelihood_histogram(r.shuffled, bins);
  r.hellinger = hellinger(r.regular_hist, r.shuffled_hist);
  return r;
}

// ---------------------------------------------------------------------------
// Use case 3: matching

inline constexpr std::array<int, 4> kTopPercents{5, 10, 15, 20};

struct MatchMetrics {
  double top1 = 0.0;
  std::array<double, 4> top_percent{};  // for kTopPercents
  std::vector<std::size_t> rank;        // 1-based rank of the true candidate
  std::vector<double> hamming;
  std::vector<double> minmax_gt;
  double mean_hamming = 0.0;
  double mean_minmax_gt = 0.0;
};

inline std::size_t top_percent_cutoff(int k, std::size_t m) {
  return (static_cast<std::size_t>(k) * m + 99) / 100;
}

/// Mismatched mobility tuples over sequence length.
inline double normalized_hamming(std::span<const RefinedBehavior> a, std::span<const RefinedBehavior> b) {
  if (a.size() != b.size()) throw InputError("hamming: sequences differ in length");
  if (a.empty()) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += mobility_index(a[i]) != mobility_index(b[i]);
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

/// truth[u] is the index of traffic sequence u's own mobility sequence.
template <class MobilityCorpus>
MatchMetrics match_metrics(const MatchResult& m, std::span<const std::size_t> truth, const MobilityCorpus& mobility) {
  if (truth.size() != m.n_traffic) throw InputError("match metrics: ground truth does not cover every user");
  if (m.n_traffic == 0) throw InputError("match metrics: no users");
  MatchMetrics out;
  const std::size_t n = m.n_traffic;
  for (std::size_t u = 0; u < n; ++u) {
    const std::size_t t = truth[u];
    if (t >= m.n_mobility || std::isnan(m.score(u, t)))
      throw InputError("match metrics: ground truth of user " + std::to_string(u) + " is not among the candidates");
    const double gt = m.score(u, t);
    std::size_t rank = 1;
    double lo = gt, hi = gt;
    for (std::size_t v = 0; v < m.n_mobility; ++v) {
      const double s = m.score(u, v);
      if (std::isnan(s)) continue;
      if (s > gt || (s == gt && v < t)) ++rank;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    out.rank.push_back(rank);
    out.top1 += rank == 1;
    for (std::size_t k = 0; k < kTopPercents.size(); ++k)
      out.top_percent[k] += rank <= top_percent_cutoff(kTopPercents[k], m.n_mobility);
    out.minmax_gt.push_back(hi > lo ? (gt - lo) / (hi - lo) : 1.0);
    out.hamming.push_back(normalized_hamming(std::span<const RefinedBehavior>(mobility[m.assignment[u]]),
                                             std::span<const RefinedBehavior>(mobility[t])));
  }
  const double dn = static_cast<double>(n);
  out.top1 /= dn;
  for (auto& v : out.top_percent) v /= dn;
  out.mean_hamming = std::accumulate(out.hamming.begin(), out.hamming.end(), 0.0) / dn;
  out.mean_minmax_gt = std::accumulate(out.minmax_gt.begin(), out.minmax_gt.end(), 0.0) / dn;
  return out;
}

}  // namespace xdrmob
