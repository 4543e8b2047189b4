#pragma once

// Markov model over joint (time, traffic, mobility) step states.
//
// A state packs a time token with the refined step tuple; its code orders
// states by (time_token, trc, disc, rep, sta). Transition probabilities are
// row-normalized counts observed between consecutive steps of one user; a
// transition never seen in training has probability 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xdrmob/error.hpp"
#include "xdrmob/ingest.hpp"
#include "xdrmob/parallel.hpp"
#include "xdrmob/step.hpp"
#include "xdrmob/text.hpp"

namespace xdrmob {

enum class TimeMode { hour, slot };
enum class RateMode { all, unique };

inline std::string_view to_string(TimeMode m) { return m == TimeMode::hour ? "hour" : "slot"; }
inline std::string_view to_string(RateMode m) { return m == RateMode::all ? "all" : "unique"; }

inline TimeMode parse_time_mode(std::string_view s) {
  if (s == "hour") return TimeMode::hour;
  if (s == "slot") return TimeMode::slot;
  throw InputError("time_mode must be hour or slot, got '" + std::string(s) + "'");
}

inline RateMode parse_rate_mode(std::string_view s) {
  if (s == "all") return RateMode::all;
  if (s == "unique") return RateMode::unique;
  throw InputError("rt_mode must be all or unique, got '" + std::string(s) + "'");
}

struct MarkovConfig {
  TimeMode time_mode = TimeMode::hour;
  double alpha = 0.0;
  RateMode rt_mode = RateMode::all;

  friend bool operator==(const MarkovConfig&, const MarkovConfig&) = default;
};

inline constexpr int kMobilityTuples = 12;  // disc x rep x sta
inline constexpr int kStatesPerToken = 3 * kMobilityTuples;

inline int time_token_count(TimeMode m) { return m == TimeMode::hour ? 24 : kSlotsPerDay; }

inline int time_token(int slot, TimeMode m) {
  const int of_day = ((slot % kSlotsPerDay) + kSlotsPerDay) % kSlotsPerDay;
  return m == TimeMode::hour ? of_day / 2 : of_day;
}

inline int mobility_index(Distance d, bool rep, bool sta) {
  return static_cast<int>(d) * 4 + (rep ? 2 : 0) + (sta ? 1 : 0);
}
inline int mobility_index(const RefinedBehavior& b) { return mobility_index(b.disc, b.rep, b.sta); }

struct StateKey {
  int time_token = 0;
  Traffic trc = Traffic::light;
  Distance disc = Distance::close;
  bool rep = false;
  bool sta = false;

  friend auto operator<=>(const StateKey&, const StateKey&) = default;
};

using StateCode = std::uint16_t;

inline StateCode encode_state(const StateKey& k) {
  return static_cast<StateCode>(k.time_token * kStatesPerToken + static_cast<int>(k.trc) * kMobilityTuples +
                                mobility_index(k.disc, k.rep, k.sta));
}

inline StateKey decode_state(StateCode c) {
  StateKey k;
  k.time_token = c / kStatesPerToken;
  const int rest = c % kStatesPerToken;
  k.trc = static_cast<Traffic>(rest / kMobilityTuples);
  const int mob = rest % kMobilityTuples;
  k.disc = static_cast<Distance>(mob / 4);
  k.rep = (mob & 2) != 0;
  k.sta = (mob & 1) != 0;
  return k;
}

inline StateCode state_code(const RefinedBehavior& b, TimeMode m) {
  return encode_state({time_token(b.slot, m), b.trc, b.disc, b.rep, b.sta});
}

inline std::vector<StateCode> state_codes(std::span<const RefinedBehavior> seq, TimeMode m) {
  std::vector<StateCode> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) out[i] = state_code(seq[i], m);
  return out;
}

/// Raw training counts. Merging is associative and commutative.
struct TransitionCounts {
  std::map<StateCode, std::uint64_t> start;
  std::map<StateCode, std::uint64_t> freq;
  std::map<std::pair<StateCode, StateCode>, std::uint64_t> trans;

  void add_sequence(std::span<const StateCode> codes) {
    if (codes.empty()) return;
    ++start[codes.front()];
    for (std::size_t i = 0; i < codes.size(); ++i) {
      ++freq[codes[i]];
      if (i + 1 < codes.size()) ++trans[{codes[i], codes[i + 1]}];
    }
  }

  void merge(const TransitionCounts& o) {
    for (const auto& [k, v] : o.start) start[k] += v;
    for (const auto& [k, v] : o.freq) freq[k] += v;
    for (const auto& [k, v] : o.trans) trans[k] += v;
  }

  friend bool operator==(const TransitionCounts&, const TransitionCounts&) = default;
};

struct Successor {
  StateCode to = 0;
  std::uint64_t count = 0;
};

/// Immutable trained model. Derived lookup structures are built once at
/// construction, so a model can be shared across threads.
class MarkovModel {
 public:
  MarkovModel(MarkovConfig config, TransitionCounts counts) : config_(config), counts_(std::move(counts)) {
    if (config_.alpha < 0.0 || config_.alpha > 1.0) throw InputError("alpha must lie in [0, 1]");
    space_ = static_cast<std::size_t>(time_token_count(config_.time_mode) * kStatesPerToken);
    for (const auto& [code, f] : counts_.freq) {
      if (code >= space_) throw InputError("state code outside the configured time mode");
      states_.push_back(code);
    }
    id_.assign(space_, -1);
    for (std::size_t i = 0; i < states_.size(); ++i) id_[states_[i]] = static_cast<int>(i);

    successors_.assign(space_, {});
    out_total_.assign(space_, 0);
    for (const auto& [key, c] : counts_.trans) {
      if (key.first >= space_ || key.second >= space_) throw InputError("transition outside the configured time mode");
      successors_[key.first].push_back({key.second, c});
      out_total_[key.first] += c;
    }
    log_p_.assign(space_ * space_, -std::numeric_limits<double>::infinity());
    for (const auto& [key, c] : counts_.trans)
      log_p_[key.first * space_ + key.second] = std::log(static_cast<double>(c) / static_cast<double>(out_total_[key.first]));
  }

  const MarkovConfig& config() const { return config_; }
  const TransitionCounts& counts() const { return counts_; }
  std::size_t state_space() const { return space_; }

  /// Observed states, sorted by code; the index is the state id.
  const std::vector<StateCode>& states() const { return states_; }
  std::optional<std::size_t> state_id(StateCode c) const {
    if (c >= space_ || id_[c] < 0) return std::nullopt;
    return static_cast<std::size_t>(id_[c]);
  }

  std::uint64_t start_count(StateCode c) const { return lookup(counts_.start, c); }
  std::uint64_t state_freq(StateCode c) const { return lookup(counts_.freq, c); }

  std::span<const Successor> successors(StateCode from) const {
    if (from >= space_) return {};
    return successors_[from];
  }

  double probability(StateCode from, StateCode to) const {
    if (from >= space_ || to >= space_) return 0.0;
    const double lp = log_p_[from * space_ + to];
    return std::isinf(lp) ? 0.0 : std::exp(lp);
  }

  /// Direct count ratio, without the log round trip.
  double probability_exact(StateCode from, StateCode to) const {
    if (from >= space_ || out_total_[from] == 0) return 0.0;
    auto it = counts_.trans.find({from, to});
    if (it == counts_.trans.end()) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(out_total_[from]);
  }

  /// -inf when the transition was never observed.
  double log_probability(StateCode from, StateCode to) const {
    if (from >= space_ || to >= space_) return -std::numeric_limits<double>::infinity();
    return log_p_[from * space_ + to];
  }

  const double* log_probability_table() const { return log_p_.data(); }

 private:
  template <class Map>
  static std::uint64_t lookup(const Map& m, StateCode c) {
    auto it = m.find(c);
    return it == m.end() ? 0 : it->second;
  }

  MarkovConfig config_;
  TransitionCounts counts_;
  std::size_t space_ = 0;
  std::vector<StateCode> states_;
  std::vector<int> id_;
  std::vector<std::vector<Successor>> successors_;
  std::vector<std::uint64_t> out_total_;
  std::vector<double> log_p_;  // dense space_ x space_
};

template <class Corpus>
MarkovModel train(const Corpus& corpus, const MarkovConfig& config) {
  TransitionCounts counts;
  for (const auto& seq : corpus) {
    const auto codes = state_codes(std::span<const RefinedBehavior>(seq), config.time_mode);
    counts.add_sequence(codes);
  }
  if (counts.freq.empty()) throw TrainingError("training corpus is empty");
  return MarkovModel(config, std::move(counts));
}

/// Counts each contiguous shard on its own thread and merges the shard maps.
template <class Corpus>
MarkovModel train_sharded(const Corpus& corpus, const MarkovConfig& config, std::size_t shards, unsigned threads = 1) {
  shards = std::max<std::size_t>(1, std::min<std::size_t>(shards, corpus.size()));
  std::vector<TransitionCounts> part(shards);
  parallel_for(shards, threads, [&](std::size_t s) {
    const std::size_t lo = corpus.size() * s / shards, hi = corpus.size() * (s + 1) / shards;
    for (std::size_t i = lo; i < hi; ++i)
      part[s].add_sequence(state_codes(std::span<const RefinedBehavior>(corpus[i]), config.time_mode));
  });
  TransitionCounts counts;
  for (const auto& p : part) counts.merge(p);
  if (counts.freq.empty()) throw TrainingError("training corpus is empty");
  return MarkovModel(config, std::move(counts));
}

inline MarkovModel merge(const MarkovModel& a, const MarkovModel& b) {
  if (!(a.config() == b.config())) throw InputError("cannot merge models with different configurations");
  TransitionCounts c = a.counts();
  c.merge(b.counts());
  return MarkovModel(a.config(), std::move(c));
}

// ---------------------------------------------------------------------------
// Likelihood

struct LikelihoodBreakdown {
  std::size_t n_valid = 0;
  std::size_t n_total = 0;
  double r_t = 0.0;
  double p_all_t = 0.0;
  double pi = 0.0;
};

namespace detail {
inline LikelihoodBreakdown finish(std::size_t n_valid, std::size_t n_total, double log_sum, double alpha) {
  LikelihoodBreakdown b;
  b.n_valid = n_valid;
  b.n_total = n_total;
  b.r_t = n_total ? static_cast<double>(n_valid) / static_cast<double>(n_total) : 0.0;
  b.p_all_t = n_valid ? std::exp(log_sum / static_cast<double>(n_valid)) : 0.0;
  b.pi = alpha * b.r_t + (1.0 - alpha) * b.p_all_t;
  return b;
}
}  // namespace detail

inline LikelihoodBreakdown likelihood_of_codes(const MarkovModel& model, std::span<const StateCode> codes) {
  if (codes.size() < 2) throw InputError("likelihood needs a sequence of at least 2 steps");
  const auto& cfg = model.config();
  std::size_t n_valid = 0;
  double log_sum = 0.0;
  if (cfg.rt_mode == RateMode::all) {
    for (std::size_t i = 0; i + 1 < codes.size(); ++i) {
      const double lp = model.log_probability(codes[i], codes[i + 1]);
      if (std::isinf(lp)) continue;
      ++n_valid;
      log_sum += lp;
    }
    return detail::finish(n_valid, codes.size() - 1, log_sum, cfg.alpha);
  }
  std::vector<std::uint32_t> pairs;
  pairs.reserve(codes.size() - 1);
  for (std::size_t i = 0; i + 1 < codes.size(); ++i)
    pairs.push_back((static_cast<std::uint32_t>(codes[i]) << 16) | codes[i + 1]);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  for (auto p : pairs) {
    const double lp = model.log_probability(static_cast<StateCode>(p >> 16), static_cast<StateCode>(p & 0xFFFF));
    if (std::isinf(lp)) continue;
    ++n_valid;
    log_sum += lp;
  }
  return detail::finish(n_valid, pairs.size(), log_sum, cfg.alpha);
}

/// pi = alpha * r_t + (1 - alpha) * p_all_t for one behavior sequence.
inline LikelihoodBreakdown sequence_likelihood(const MarkovModel& model, std::span<const RefinedBehavior> seq) {
  const auto codes = state_codes(seq, model.config().time_mode);
  return likelihood_of_codes(model, codes);
}

// ---------------------------------------------------------------------------
// Conditional sampling

enum class Direction { mobility_given_traffic, traffic_given_mobility };

struct SampleResult {
  std::vector<RefinedBehavior> sequence;
  // [0] sampled from a transition row (or start counts at step 0);
  // [1] state frequency within the (time, known half) match set;
  // [2] state frequency matching the known half at any time;
  // [3] uniform over the unknown half.
  std::array<std::size_t, 4> fallback_counts{};
};

namespace detail {

struct Candidate {
  StateCode code;
  std::uint64_t weight;
};

template <class Rng>
std::size_t pick(std::span<const Candidate> c, Rng& rng) {
  std::vector<double> w(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) w[i] = static_cast<double>(c[i].weight);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return dist(rng);
}

}  // namespace detail

/// Generates the unknown half of `observed` (the known half and slots are
/// copied) by walking the model's transitions restricted to states that agree
/// with each observed step.
class ConditionalSampler {
 public:
  ConditionalSampler(const MarkovModel& model, Direction dir) : model_(model), dir_(dir) {
    const int tokens = time_token_count(model.config().time_mode);
    by_time_.assign(static_cast<std::size_t>(tokens * known_alphabet()), {});
    by_known_.assign(static_cast<std::size_t>(known_alphabet()), {});
    start_.assign(by_time_.size(), {});
    for (auto code : model.states()) {
      const auto key = decode_state(code);
      const int known = known_of(key);
      by_time_[static_cast<std::size_t>(key.time_token * known_alphabet() + known)].push_back({code, model.state_freq(code)});
      by_known_[static_cast<std::size_t>(known)].push_back({code, model.state_freq(code)});
      if (auto s = model.start_count(code))
        start_[static_cast<std::size_t>(key.time_token * known_alphabet() + known)].push_back({code, s});
    }
  }

  SampleResult sample(std::span<const RefinedBehavior> observed, std::uint64_t seed) const {
    if (observed.empty()) throw InputError("conditional sampling needs at least one observed step");
    std::mt19937_64 rng(seed);
    const TimeMode tm = model_.config().time_mode;
    SampleResult r;
    r.sequence.reserve(observed.size());
    std::vector<detail::Candidate> cand;
    StateCode prev = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
      const auto& obs = observed[i];
      const int token = time_token(obs.slot, tm);
      const int known = known_of(obs);
      const auto match_key = static_cast<std::size_t>(token * known_alphabet() + known);

      std::optional<StateCode> chosen;
      int level = 0;
      if (i == 0) {
        if (!start_[match_key].empty()) chosen = start_[match_key][detail::pick<std::mt19937_64>(start_[match_key], rng)].code;
      } else {
        cand.clear();
        for (const auto& s : model_.successors(prev)) {
          const auto k = decode_state(s.to);
          if (k.time_token == token && known_of(k) == known) cand.push_back({s.to, s.count});
        }
        if (!cand.empty()) chosen = cand[detail::pick<std::mt19937_64>(cand, rng)].code;
      }
      if (!chosen && !by_time_[match_key].empty()) {
        level = 1;
        chosen = by_time_[match_key][detail::pick<std::mt19937_64>(by_time_[match_key], rng)].code;
      }
      RefinedBehavior out = obs;
      if (!chosen && !by_known_[static_cast<std::size_t>(known)].empty()) {
        level = 2;
        const auto& pool = by_known_[static_cast<std::size_t>(known)];
        const auto k = decode_state(pool[detail::pick<std::mt19937_64>(pool, rng)].code);
        copy_unknown(k, out);
      } else if (!chosen) {
        level = 3;
        std::uniform_int_distribution<int> u(0, unknown_alphabet() - 1);
        set_unknown_from_index(u(rng), out);
      } else {
        copy_unknown(decode_state(*chosen), out);
      }
      ++r.fallback_counts[static_cast<std::size_t>(level)];
      // The walk continues from the state actually emitted.
      prev = state_code(out, tm);
      r.sequence.push_back(out);
    }
    return r;
  }

 private:
  int known_alphabet() const { return dir_ == Direction::mobility_given_traffic ? 3 : kMobilityTuples; }
  int unknown_alphabet() const { return dir_ == Direction::mobility_given_traffic ? kMobilityTuples : 3; }

  template <class T>
  int known_of(const T& k) const {
    return dir_ == Direction::mobility_given_traffic ? static_cast<int>(k.trc) : mobility_index(k.disc, k.rep, k.sta);
  }

  void copy_unknown(const StateKey& k, RefinedBehavior& out) const {
    if (dir_ == Direction::mobility_given_traffic) {
      out.disc = k.disc;
      out.rep = k.rep;
      out.sta = k.sta;
    } else {
      out.trc = k.trc;
    }
  }

  void set_unknown_from_index(int idx, RefinedBehavior& out) const {
    if (dir_ == Direction::mobility_given_traffic) {
      out.disc = static_cast<Distance>(idx / 4);
      out.rep = (idx & 2) != 0;
      out.sta = (idx & 1) != 0;
    } else {
      out.trc = static_cast<Traffic>(idx);
    }
  }

  const MarkovModel& model_;
  Direction dir_;
  std::vector<std::vector<detail::Candidate>> by_time_;
  std::vector<std::vector<detail::Candidate>> by_known_;
  std::vector<std::vector<detail::Candidate>> start_;
};

inline SampleResult sample_conditional(const MarkovModel& model, std::span<const RefinedBehavior> observed,
                                       Direction dir, std::uint64_t seed) {
  return ConditionalSampler(model, dir).sample(observed, seed);
}

// ---------------------------------------------------------------------------
// Matching traffic sequences to mobility sequences

struct MatchResult {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t n_traffic = 0;
  std::size_t n_mobility = 0;
  std::vector<double> scores;  // row-major [traffic][mobility]; NaN where the pair was skipped
  std::vector<std::size_t> assignment;
  std::size_t skipped_pairs = 0;

  double score(std::size_t u, std::size_t v) const { return scores[u * n_mobility + v]; }

  /// Valid candidates of traffic sequence u, best first (ties: lower index).
  std::vector<std::size_t> ranking(std::size_t u) const {
    std::vector<std::size_t> idx;
    for (std::size_t v = 0; v < n_mobility; ++v)
      if (!std::isnan(score(u, v))) idx.push_back(v);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score(u, a) > score(u, b); });
    return idx;
  }
};

namespace detail {

struct HalfSequence {
  std::vector<std::uint8_t> tokens;
  std::vector<StateCode> part;  // traffic: token*36 + trc*12; mobility: mobility index
};

inline HalfSequence traffic_half(std::span<const RefinedBehavior> s, TimeMode m) {
  HalfSequence h;
  for (const auto& b : s) {
    const int t = time_token(b.slot, m);
    h.tokens.push_back(static_cast<std::uint8_t>(t));
    h.part.push_back(static_cast<StateCode>(t * kStatesPerToken + static_cast<int>(b.trc) * kMobilityTuples));
  }
  return h;
}

inline HalfSequence mobility_half(std::span<const RefinedBehavior> s, TimeMode m) {
  HalfSequence h;
  for (const auto& b : s) {
    h.tokens.push_back(static_cast<std::uint8_t>(time_token(b.slot, m)));
    h.part.push_back(static_cast<StateCode>(mobility_index(b)));
  }
  return h;
}

}  // namespace detail

/// Zips the traffic half of one sequence with the mobility half of another.
inline std::vector<RefinedBehavior> zip_halves(std::span<const RefinedBehavior> traffic,
                                               std::span<const RefinedBehavior> mobility) {
  if (traffic.size() != mobility.size()) throw InputError("cannot zip sequences of different lengths");
  std::vector<RefinedBehavior> out(traffic.begin(), traffic.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].disc = mobility[i].disc;
    out[i].rep = mobility[i].rep;
    out[i].sta = mobility[i].sta;
  }
  return out;
}

/// Scores every (traffic u, mobility v) pair and assigns each traffic
/// sequence its highest-scoring candidate independently. Pairs whose lengths
/// or time tokens differ are skipped.
template <class TrafficCorpus, class MobilityCorpus>
MatchResult match_datasets(const MarkovModel& model, const TrafficCorpus& traffic, const MobilityCorpus& mobility,
                           unsigned threads = 1) {
  const TimeMode tm = model.config().time_mode;
  MatchResult r;
  r.n_traffic = traffic.size();
  r.n_mobility = mobility.size();
  r.scores.assign(r.n_traffic * r.n_mobility, std::numeric_limits<double>::quiet_NaN());
  r.assignment.assign(r.n_traffic, MatchResult::npos);

  std::vector<detail::HalfSequence> th(r.n_traffic), mh(r.n_mobility);
  for (std::size_t u = 0; u < r.n_traffic; ++u) th[u] = detail::traffic_half(std::span<const RefinedBehavior>(traffic[u]), tm);
  for (std::size_t v = 0; v < r.n_mobility; ++v) mh[v] = detail::mobility_half(std::span<const RefinedBehavior>(mobility[v]), tm);

  const double* table = model.log_probability_table();
  const std::size_t space = model.state_space();
  const double alpha = model.config().alpha;
  const bool all_mode = model.config().rt_mode == RateMode::all;
  std::vector<std::size_t> skipped(r.n_traffic, 0);

  parallel_for(r.n_traffic, threads, [&](std::size_t u) {
    const auto& a = th[u];
    std::vector<StateCode> codes;
    for (std::size_t v = 0; v < r.n_mobility; ++v) {
      const auto& b = mh[v];
      if (a.tokens.size() != b.tokens.size() || a.tokens.size() < 2 || a.tokens != b.tokens) {
        ++skipped[u];
        continue;
      }
      const std::size_t n = a.part.size();
      LikelihoodBreakdown lb;
      if (all_mode) {
        std::size_t n_valid = 0;
        double log_sum = 0.0;
        std::size_t from = static_cast<std::size_t>(a.part[0] + b.part[0]);
        for (std::size_t i = 1; i < n; ++i) {
          const std::size_t to = static_cast<std::size_t>(a.part[i] + b.part[i]);
          const double lp = table[from * space + to];
          if (lp != -std::numeric_limits<double>::infinity()) {
            ++n_valid;
            log_sum += lp;
          }
          from = to;
        }
        lb = detail::finish(n_valid, n - 1, log_sum, alpha);
      } else {
        codes.resize(n);
        for (std::size_t i = 0; i < n; ++i) codes[i] = static_cast<StateCode>(a.part[i] + b.part[i]);
        lb = likelihood_of_codes(model, codes);
      }
      r.scores[u * r.n_mobility + v] = lb.pi;
    }
    double best = -1.0;
    for (std::size_t v = 0; v < r.n_mobility; ++v) {
      const double s = r.scores[u * r.n_mobility + v];
      if (!std::isnan(s) && s > best) {
        best = s;
        r.assignment[u] = v;
      }
    }
  });
  for (auto s : skipped) r.skipped_pairs += s;
  return r;
}

// ---------------------------------------------------------------------------
// Model file

inline void write_model(std::ostream& out, const MarkovModel& m) {
  const auto& cfg = m.config();
  out << "xdr-markov v1 time_mode=" << to_string(cfg.time_mode) << " alpha=" << text::format_double(cfg.alpha)
      << " rt_mode=" << to_string(cfg.rt_mode) << '\n';
  const auto& states = m.states();
  for (std::size_t id = 0; id < states.size(); ++id) {
    const auto k = decode_state(states[id]);
    out << "state " << id << ' ' << k.time_token << ' ' << to_char(k.trc) << ' ' << to_char(k.disc) << ' '
        << (k.rep ? 1 : 0) << ' ' << (k.sta ? 1 : 0) << ' ' << m.state_freq(states[id]) << '\n';
  }
  for (const auto& [code, c] : m.counts().start) out << "start " << *m.state_id(code) << ' ' << c << '\n';
  for (const auto& [key, c] : m.counts().trans)
    out << "trans " << *m.state_id(key.first) << ' ' << *m.state_id(key.second) << ' ' << c << '\n';
}

inline MarkovModel read_model(std::istream& in) {
  std::string line;
  if (!text::read_line(in, line)) throw InputError("model: empty file");
  auto head = text::split(line, ' ');
  if (head.size() != 5 || head[0] != "xdr-markov" || head[1] != "v1") throw InputError("model: bad header '" + line + "'");
  MarkovConfig cfg;
  auto value = [&](std::string_view field, std::string_view key) {
    if (field.substr(0, key.size()) != key) throw InputError("model: expected " + std::string(key) + " in header");
    return field.substr(key.size());
  };
  cfg.time_mode = parse_time_mode(value(head[2], "time_mode="));
  cfg.alpha = text::require_double(value(head[3], "alpha="), "alpha");
  cfg.rt_mode = parse_rate_mode(value(head[4], "rt_mode="));

  TransitionCounts counts;
  std::vector<StateCode> by_id;
  const int tokens = time_token_count(cfg.time_mode);
  std::size_t lineno = 1;
  auto state_at = [&](std::string_view s) {
    const auto id = text::require_int<std::size_t>(s, "state id");
    if (id >= by_id.size()) throw InputError("model line " + std::to_string(lineno) + ": unknown state id");
    return by_id[id];
  };
  while (text::read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = text::split(line, ' ');
    if (f[0] == "state") {
      if (f.size() != 8) throw InputError("model line " + std::to_string(lineno) + ": state needs 7 fields");
      if (text::require_int<std::size_t>(f[1], "state id") != by_id.size())
        throw InputError("model line " + std::to_string(lineno) + ": state ids must be consecutive");
      StateKey k;
      k.time_token = text::require_int<int>(f[2], "time_token");
      if (k.time_token < 0 || k.time_token >= tokens) throw InputError("model: time token out of range");
      k.trc = parse_traffic(f[3]);
      k.disc = parse_distance(f[4]);
      k.rep = parse_flag(f[5]);
      k.sta = parse_flag(f[6]);
      const auto code = encode_state(k);
      if (!by_id.empty() && code <= by_id.back()) throw InputError("model: states must be sorted");
      by_id.push_back(code);
      counts.freq[code] = text::require_int<std::uint64_t>(f[7], "freq");
    } else if (f[0] == "start") {
      if (f.size() != 3) throw InputError("model line " + std::to_string(lineno) + ": start needs 2 fields");
      counts.start[state_at(f[1])] = text::require_int<std::uint64_t>(f[2], "count");
    } else if (f[0] == "trans") {
      if (f.size() != 4) throw InputError("model line " + std::to_string(lineno) + ": trans needs 3 fields");
      counts.trans[{state_at(f[1]), state_at(f[2])}] = text::require_int<std::uint64_t>(f[3], "count");
    } else {
      throw InputError("model line " + std::to_string(lineno) + ": unknown record '" + std::string(f[0]) + "'");
    }
  }
  if (counts.freq.empty()) throw InputError("model: no states");
  return MarkovModel(cfg, std::move(counts));
}

}  // namespace xdrmob
