#pragma once

// Step-level behavior encoding: every located event becomes a tuple of
// discretized traffic and mobility descriptors.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "xdrmob/error.hpp"
#include "xdrmob/features.hpp"
#include "xdrmob/geo.hpp"
#include "xdrmob/ingest.hpp"
#include "xdrmob/text.hpp"

namespace xdrmob {

enum class Traffic : std::uint8_t { light = 0, medium = 1, heavy = 2 };
enum class Distance : std::uint8_t { close = 0, medium = 1, far = 2 };

inline char to_char(Traffic t) { return "lmh"[static_cast<int>(t)]; }
inline char to_char(Distance d) { return "cmf"[static_cast<int>(d)]; }

inline Traffic parse_traffic(std::string_view s) {
  if (s == "l") return Traffic::light;
  if (s == "m") return Traffic::medium;
  if (s == "h") return Traffic::heavy;
  throw InputError("traffic class must be l, m or h, got '" + std::string(s) + "'");
}

inline Distance parse_distance(std::string_view s) {
  if (s == "c") return Distance::close;
  if (s == "m") return Distance::medium;
  if (s == "f") return Distance::far;
  throw InputError("distance class must be c, m or f, got '" + std::string(s) + "'");
}

inline bool parse_flag(std::string_view s) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw InputError("flag must be 0 or 1, got '" + std::string(s) + "'");
}

/// Tertile boundaries of the training population's nonzero session volumes
/// and positive step distances.
struct Thresholds {
  std::string province;  // empty: not tied to a province
  double volume_q1 = 0.0;
  double volume_q2 = 0.0;
  double distance_q1 = 0.0;
  double distance_q2 = 0.0;
};

/// Nearest-rank tertiles: sorted[ceil(n/3)] and sorted[ceil(2n/3)], 1-indexed.
inline std::pair<double, double> nearest_rank_tertiles(std::vector<double> values) {
  if (values.size() < 3) throw ThresholdFitError("need at least 3 values to fit tertiles, got " + std::to_string(values.size()));
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t r1 = (n + 2) / 3;
  const std::size_t r2 = (2 * n + 2) / 3;
  return {values[r1 - 1], values[r2 - 1]};
}

/// Step distance of each located event to the next located one.
inline std::vector<double> step_distances(const UserSequence& user, const CellCatalog& catalog) {
  const auto cells = trajectory(user);
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < cells.size(); ++i)
    d.push_back(haversine_km(catalog.position(cells[i]), catalog.position(cells[i + 1])));
  return d;
}

inline Thresholds fit_thresholds(std::span<const UserSequence> training, const CellCatalog& catalog,
                                 std::string province = {}) {
  std::vector<double> volumes, distances;
  for (const auto& u : training) {
    for (const auto& e : u.events)
      if (e.volume > 0) volumes.push_back(static_cast<double>(e.volume));
    for (double d : step_distances(u, catalog))
      if (d > 0.0) distances.push_back(d);
  }
  Thresholds t;
  t.province = std::move(province);
  try {
    std::tie(t.volume_q1, t.volume_q2) = nearest_rank_tertiles(std::move(volumes));
  } catch (const ThresholdFitError& e) {
    throw ThresholdFitError(std::string("volume thresholds: ") + e.what());
  }
  try {
    std::tie(t.distance_q1, t.distance_q2) = nearest_rank_tertiles(std::move(distances));
  } catch (const ThresholdFitError& e) {
    throw ThresholdFitError(std::string("distance thresholds: ") + e.what());
  }
  return t;
}

// Boundaries belong to the lower class.
inline Traffic classify_volume(double volume, const Thresholds& t) {
  if (volume <= t.volume_q1) return Traffic::light;
  if (volume <= t.volume_q2) return Traffic::medium;
  return Traffic::heavy;
}

inline Distance classify_distance(double km, const Thresholds& t) {
  if (km <= t.distance_q1) return Distance::close;
  if (km <= t.distance_q2) return Distance::medium;
  return Distance::far;
}

struct StepBehavior {
  int slot = 0;
  Traffic trc = Traffic::light;
  Distance disc = Distance::close;
  bool rep = false;
  bool sta = false;
  double delta_div = 0.0;
  std::uint32_t popularity = 0;
  std::uint32_t flow = 0;
};

using BehaviorSequence = std::vector<StepBehavior>;

/// The traffic/mobility subset retained for modeling.
struct RefinedBehavior {
  int slot = 0;
  Traffic trc = Traffic::light;
  Distance disc = Distance::close;
  bool rep = false;
  bool sta = false;

  friend bool operator==(const RefinedBehavior&, const RefinedBehavior&) = default;
};

/// Encodes each located event. The last event has no successor: its distance
/// is 0 (class c), it counts as stationary and has no flow.
inline BehaviorSequence encode_sequence(const UserSequence& user, const Thresholds& thresholds,
                                        const PopulationTables& tables, const CellCatalog& catalog,
                                        std::size_t diversity_window = 2) {
  if (!thresholds.province.empty() && thresholds.province != tables.popularity.province)
    throw ConsistencyError("thresholds fitted for province '" + thresholds.province + "' used with tables of '" +
                           tables.popularity.province + "'");
  if (tables.popularity.province != tables.flow.province)
    throw ConsistencyError("popularity and flow tables belong to different provinces");

  std::vector<int> slots;
  std::vector<CellId> cells;
  std::vector<std::uint64_t> volumes;
  for (const auto& e : user.events) {
    if (!e.located()) continue;
    if (!e.resolved()) throw InputError("user " + user.user_id + ": unresolved location at slot " + std::to_string(e.slot));
    slots.push_back(e.slot);
    cells.push_back(e.cell_id);
    volumes.push_back(e.volume);
  }
  const std::size_t n = cells.size();
  const auto div = prefix_diversity(std::span<const CellId>(cells), diversity_window);

  BehaviorSequence out(n);
  std::unordered_set<CellId> visited;
  for (std::size_t i = 0; i < n; ++i) {
    auto& b = out[i];
    b.slot = slots[i];
    b.trc = classify_volume(static_cast<double>(volumes[i]), thresholds);
    const bool last = i + 1 == n;
    const double dist = last ? 0.0 : haversine_km(catalog.position(cells[i]), catalog.position(cells[i + 1]));
    b.disc = classify_distance(dist, thresholds);
    b.sta = last || cells[i] == cells[i + 1];
    b.rep = visited.count(cells[i]) > 0;
    visited.insert(cells[i]);
    b.delta_div = i == 0 ? 0.0 : div[i] - div[i - 1];
    b.popularity = tables.popularity.at(cells[i], slots[i]);
    if (b.popularity == 0) throw ConsistencyError("popularity table has no entry for user " + user.user_id);
    if (!last) {
      b.flow = tables.flow.at(cells[i], cells[i + 1], slots[i]);
      if (b.flow == 0) throw ConsistencyError("flow table has no entry for user " + user.user_id);
    }
  }
  return out;
}

inline RefinedBehavior refine(const StepBehavior& s) { return {s.slot, s.trc, s.disc, s.rep, s.sta}; }
inline RefinedBehavior refine(const RefinedBehavior& s) { return s; }

template <class Step>
std::vector<RefinedBehavior> refine(std::span<const Step> seq) {
  std::vector<RefinedBehavior> out;
  out.reserve(seq.size());
  for (const auto& s : seq) out.push_back(refine(s));
  return out;
}

inline std::vector<RefinedBehavior> refine(const BehaviorSequence& seq) {
  return refine(std::span<const StepBehavior>(seq));
}

// ---------------------------------------------------------------------------
// Files

struct EncodedUser {
  std::string user_id;
  BehaviorSequence steps;
};

inline constexpr std::string_view kBehaviorsHeader = "user_id,slot,trc,disc,rep,sta,delta_div,popularity,flow";

inline void write_behaviors_csv(std::ostream& out, std::span<const EncodedUser> users) {
  out << kBehaviorsHeader << '\n';
  for (const auto& u : users)
    for (const auto& s : u.steps)
      out << u.user_id << ',' << s.slot << ',' << to_char(s.trc) << ',' << to_char(s.disc) << ',' << (s.rep ? 1 : 0)
          << ',' << (s.sta ? 1 : 0) << ',' << text::format_double(s.delta_div) << ',' << s.popularity << ','
          << s.flow << '\n';
}

/// Users in file order; rows of one user must be contiguous.
inline std::vector<EncodedUser> read_behaviors_csv(std::istream& in) {
  text::expect_header(in, kBehaviorsHeader, "behaviors.csv");
  std::vector<EncodedUser> users;
  std::unordered_set<std::string> closed;
  std::string line;
  std::vector<std::string_view> f;
  std::size_t lineno = 1;
  while (text::read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    text::split(line, ',', f);
    try {
      if (f.size() != 9) throw InputError("expected 9 fields");
      if (users.empty() || users.back().user_id != f[0]) {
        if (!users.empty()) closed.insert(users.back().user_id);
        if (closed.count(std::string(f[0]))) throw InputError("rows of user " + std::string(f[0]) + " are not contiguous");
        users.push_back({std::string(f[0]), {}});
      }
      StepBehavior s;
      s.slot = text::require_int<int>(f[1], "slot");
      s.trc = parse_traffic(f[2]);
      s.disc = parse_distance(f[3]);
      s.rep = parse_flag(f[4]);
      s.sta = parse_flag(f[5]);
      s.delta_div = text::require_double(f[6], "delta_div");
      s.popularity = text::require_int<std::uint32_t>(f[7], "popularity");
      s.flow = text::require_int<std::uint32_t>(f[8], "flow");
      users.back().steps.push_back(s);
    } catch (const InputError& e) {
      throw InputError("behaviors.csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return users;
}

inline void write_thresholds(std::ostream& out, const Thresholds& t) {
  out << "key,value\n";
  out << "province," << t.province << '\n';
  out << "volume_q1," << text::format_double(t.volume_q1) << '\n';
  out << "volume_q2," << text::format_double(t.volume_q2) << '\n';
  out << "distance_q1," << text::format_double(t.distance_q1) << '\n';
  out << "distance_q2," << text::format_double(t.distance_q2) << '\n';
}

inline Thresholds read_thresholds(std::istream& in) {
  text::expect_header(in, "key,value", "thresholds");
  std::map<std::string, std::string> kv;
  std::string line;
  while (text::read_line(in, line)) {
    if (line.empty()) continue;
    const auto pos = line.find(',');
    if (pos == std::string::npos) throw InputError("thresholds: malformed line '" + line + "'");
    kv[line.substr(0, pos)] = line.substr(pos + 1);
  }
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw InputError("thresholds: missing key " + k);
    return it->second;
  };
  Thresholds t;
  t.province = kv.count("province") ? kv["province"] : "";
  t.volume_q1 = text::require_double(get("volume_q1"), "volume_q1");
  t.volume_q2 = text::require_double(get("volume_q2"), "volume_q2");
  t.distance_q1 = text::require_double(get("distance_q1"), "distance_q1");
  t.distance_q2 = text::require_double(get("distance_q2"), "distance_q2");
  if (t.volume_q1 > t.volume_q2 || t.distance_q1 > t.distance_q2) throw InputError("thresholds: q1 > q2");
  return t;
}

}  // namespace xdrmob
