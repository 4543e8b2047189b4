#pragma once

// Per-user traffic and mobility features plus the population popularity and
// flow tables the social features need.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "xdrmob/entropy.hpp"
#include "xdrmob/error.hpp"
#include "xdrmob/geo.hpp"
#include "xdrmob/ingest.hpp"
#include "xdrmob/parallel.hpp"
#include "xdrmob/text.hpp"

namespace xdrmob {

struct FeatureOptions {
  std::size_t diversity_window = 2;
  // Below this many located events the entropy estimate is not trusted.
  std::size_t min_predictability_events = 10;
};

struct TrafficFeatures {
  double avg_events_per_day = 0.0;
  double avg_session_volume = 0.0;
};

struct SpatialFeatures {
  double avg_step_distance_km = 0.0;
  double rg_unique_km = 0.0;
  double rg_event_km = 0.0;
};

struct StructuralFeatures {
  double repetitiveness = 0.0;
  double stationarity = 0.0;
  double diversity = 0.0;
  double entropy = 0.0;
  double predictability = 0.0;
  bool predictability_defined = false;
  std::size_t n_succ_ret = 0;
  std::size_t n_succ_expl = 0;
};

struct SocialFeatures {
  double popularity_influence = 0.0;
  double flow_measurement = 0.0;
};

struct UserFeatures {
  std::string user_id;
  std::string province;
  TrafficFeatures traffic;
  SpatialFeatures spatial;
  StructuralFeatures structural;
  SocialFeatures social;
};

/// Cells of the located (volume > 0) events, in slot order.
inline std::vector<CellId> trajectory(const UserSequence& user) {
  std::vector<CellId> cells;
  cells.reserve(user.events.size());
  for (const auto& e : user.events) {
    if (!e.located()) continue;
    if (!e.resolved()) throw InputError("user " + user.user_id + ": unresolved location at slot " + std::to_string(e.slot));
    cells.push_back(e.cell_id);
  }
  return cells;
}

inline TrafficFeatures traffic_features(const UserSequence& user) {
  std::size_t active = 0;
  double volume = 0.0;
  for (const auto& e : user.events) {
    if (e.volume == 0) continue;
    ++active;
    volume += static_cast<double>(e.volume);
  }
  if (active == 0) return {};
  return {static_cast<double>(active) / kDaysPerWeek, volume / static_cast<double>(active)};
}

inline SpatialFeatures spatial_features(std::span<const CellId> cells, const CellCatalog& catalog) {
  SpatialFeatures f;
  if (cells.size() < 2) return f;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cells.size(); ++i)
    total += haversine_km(catalog.position(cells[i]), catalog.position(cells[i + 1]));
  f.avg_step_distance_km = total / static_cast<double>(cells.size() - 1);

  std::map<CellId, double> visits;
  for (auto c : cells) visits[c] += 1.0;
  std::vector<LatLon> points;
  std::vector<double> weights;
  for (const auto& [cell, m] : visits) {
    points.push_back(catalog.position(cell));
    weights.push_back(m);
  }
  f.rg_unique_km = radius_of_gyration_km(points);
  f.rg_event_km = radius_of_gyration_km(points, weights);
  return f;
}

/// Distinct length-`window` substrings over the number of windows; 0 for
/// sequences shorter than max(window, 2).
template <class T>
double diversity(std::span<const T> s, std::size_t window) {
  if (window == 0 || s.size() < std::max<std::size_t>(window, 2)) return 0.0;
  std::set<std::vector<T>> seen;
  for (std::size_t i = 0; i + window <= s.size(); ++i) seen.emplace(s.begin() + i, s.begin() + i + window);
  return static_cast<double>(seen.size()) / static_cast<double>(s.size() - window + 1);
}

/// diversity of every prefix s[0, i], for i = 0..n-1.
template <class T>
std::vector<double> prefix_diversity(std::span<const T> s, std::size_t window) {
  std::vector<double> out(s.size(), 0.0);
  if (window == 0) return out;
  std::set<std::vector<T>> seen;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < window) continue;
    seen.emplace(s.begin() + (i + 1 - window), s.begin() + i + 1);
    const std::size_t windows = i + 2 - window;
    if (i + 1 >= 2) out[i] = static_cast<double>(seen.size()) / static_cast<double>(windows);
  }
  return out;
}

template <class T>
StructuralFeatures structural_features(std::span<const T> s, const FeatureOptions& opt = {}) {
  StructuralFeatures f;
  const std::size_t n = s.size();
  if (n == 0) return f;

  std::unordered_set<T> seen;
  std::vector<char> is_return(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    is_return[i] = seen.count(s[i]) ? 1 : 0;
    seen.insert(s[i]);
  }
  const std::size_t n_unique = seen.size();
  f.repetitiveness = 1.0 - static_cast<double>(n_unique) / static_cast<double>(n);

  if (n >= 2) {
    std::size_t stays = 0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (s[i] == s[i + 1]) ++stays;
    f.stationarity = static_cast<double>(stays) / static_cast<double>(n - 1);
    f.diversity = diversity(s, opt.diversity_window);
    // Labels exist from the second event on.
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (is_return[i] && is_return[i + 1]) ++f.n_succ_ret;
      if (!is_return[i] && !is_return[i + 1]) ++f.n_succ_expl;
    }
  }

  f.entropy = entropy_rate(s);
  if (n_unique == 1) {
    f.predictability = 1.0;
    f.predictability_defined = true;
  } else if (n >= opt.min_predictability_events) {
    f.predictability = fano_predictability(f.entropy, n_unique);
    f.predictability_defined = true;
  }
  return f;
}

inline std::uint64_t popularity_key(CellId cell, int slot) {
  return (static_cast<std::uint64_t>(cell) << 16) | static_cast<std::uint64_t>(slot);
}

inline std::uint64_t flow_key(CellId from, CellId to, int slot) {
  return (static_cast<std::uint64_t>(from) << 40) | (static_cast<std::uint64_t>(to) << 16) |
         static_cast<std::uint64_t>(slot);
}

/// p(cell, slot): distinct users located at cell during slot-of-week.
struct PopularityTable {
  std::string province;
  std::unordered_map<std::uint64_t, std::uint32_t> counts;

  std::uint32_t at(CellId cell, int slot) const {
    auto it = counts.find(popularity_key(cell, slot));
    return it == counts.end() ? 0 : it->second;
  }
};

/// flow(from, to, slot): users moving from -> to between consecutive located
/// events, keyed by the departure slot.
struct FlowTable {
  std::string province;
  std::unordered_map<std::uint64_t, std::uint32_t> counts;

  std::uint32_t at(CellId from, CellId to, int slot) const {
    auto it = counts.find(flow_key(from, to, slot));
    return it == counts.end() ? 0 : it->second;
  }
};

struct PopulationTables {
  PopularityTable popularity;
  FlowTable flow;
};

namespace detail {
struct Located {
  int slot;
  CellId cell;
};

inline std::vector<Located> located_events(const UserSequence& user) {
  std::vector<Located> out;
  out.reserve(user.events.size());
  for (const auto& e : user.events) {
    if (!e.located()) continue;
    if (!e.resolved()) throw InputError("user " + user.user_id + ": unresolved location at slot " + std::to_string(e.slot));
    out.push_back({e.slot, e.cell_id});
  }
  return out;
}
}  // namespace detail

inline void add_to_tables(PopulationTables& tables, const UserSequence& user) {
  const auto ev = detail::located_events(user);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    ++tables.popularity.counts[popularity_key(ev[i].cell, ev[i].slot)];
    if (i + 1 < ev.size()) ++tables.flow.counts[flow_key(ev[i].cell, ev[i + 1].cell, ev[i].slot)];
  }
}

/// Slots are unique per user, so every user contributes at most once per key.
inline PopulationTables build_population_tables(std::span<const UserSequence> users, std::string province) {
  PopulationTables t;
  t.popularity.province = province;
  t.flow.province = std::move(province);
  for (const auto& u : users) add_to_tables(t, u);
  return t;
}

inline SocialFeatures social_features(const UserSequence& user, const PopularityTable& pop, const FlowTable& flow) {
  const auto ev = detail::located_events(user);
  SocialFeatures f;
  if (ev.empty()) return f;
  double psum = 0.0;
  for (const auto& e : ev) {
    const auto p = pop.at(e.cell, e.slot);
    if (p == 0) throw ConsistencyError("popularity table has no entry for user " + user.user_id);
    psum += p;
  }
  f.popularity_influence = psum / static_cast<double>(ev.size());
  if (ev.size() >= 2) {
    double fsum = 0.0;
    for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
      const auto c = flow.at(ev[i].cell, ev[i + 1].cell, ev[i].slot);
      if (c == 0) throw ConsistencyError("flow table has no entry for user " + user.user_id);
      fsum += c;
    }
    f.flow_measurement = fsum / static_cast<double>(ev.size() - 1);
  }
  return f;
}

inline UserFeatures compute_features(const UserSequence& user, const CellCatalog& catalog,
                                     const PopulationTables& tables, const FeatureOptions& opt = {}) {
  UserFeatures f;
  f.user_id = user.user_id;
  f.province = user.province;
  const auto cells = trajectory(user);
  f.traffic = traffic_features(user);
  f.spatial = spatial_features(cells, catalog);
  f.structural = structural_features(std::span<const CellId>(cells), opt);
  f.social = social_features(user, tables.popularity, tables.flow);
  return f;
}

inline std::vector<UserFeatures> compute_all_features(std::span<const UserSequence> users, const CellCatalog& catalog,
                                                      const PopulationTables& tables, const FeatureOptions& opt = {},
                                                      unsigned threads = 1) {
  std::vector<UserFeatures> out(users.size());
  parallel_for(users.size(), threads, [&](std::size_t i) { out[i] = compute_features(users[i], catalog, tables, opt); });
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kFeaturesHeader =
    "user_id,province,avg_events_per_day,avg_session_volume,avg_step_distance_km,rg_unique_km,rg_event_km,"
    "repetitiveness,stationarity,diversity,predictability,n_succ_ret,n_succ_expl,popularity_influence,"
    "flow_measurement";

inline void write_features_csv(std::ostream& out, std::span<const UserFeatures> rows) {
  using text::format_double;
  out << kFeaturesHeader << '\n';
  for (const auto& f : rows) {
    out << f.user_id << ',' << f.province << ',' << format_double(f.traffic.avg_events_per_day) << ','
        << format_double(f.traffic.avg_session_volume) << ',' << format_double(f.spatial.avg_step_distance_km) << ','
        << format_double(f.spatial.rg_unique_km) << ',' << format_double(f.spatial.rg_event_km) << ','
        << format_double(f.structural.repetitiveness) << ',' << format_double(f.structural.stationarity) << ','
        << format_double(f.structural.diversity) << ',' << format_double(f.structural.predictability) << ','
        << f.structural.n_succ_ret << ',' << f.structural.n_succ_expl << ','
        << format_double(f.social.popularity_influence) << ',' << format_double(f.social.flow_measurement) << '\n';
  }
}

inline std::vector<UserFeatures> read_features_csv(std::istream& in) {
  text::expect_header(in, kFeaturesHeader, "features.csv");
  std::vector<UserFeatures> rows;
  std::string line;
  std::vector<std::string_view> f;
  std::size_t lineno = 1;
  while (text::read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    text::split(line, ',', f);
    if (f.size() != 15) throw InputError("features.csv line " + std::to_string(lineno) + ": expected 15 fields");
    UserFeatures u;
    u.user_id = std::string(f[0]);
    u.province = std::string(f[1]);
    u.traffic.avg_events_per_day = text::require_double(f[2], "avg_events_per_day");
    u.traffic.avg_session_volume = text::require_double(f[3], "avg_session_volume");
    u.spatial.avg_step_distance_km = text::require_double(f[4], "avg_step_distance_km");
    u.spatial.rg_unique_km = text::require_double(f[5], "rg_unique_km");
    u.spatial.rg_event_km = text::require_double(f[6], "rg_event_km");
    u.structural.repetitiveness = text::require_double(f[7], "repetitiveness");
    u.structural.stationarity = text::require_double(f[8], "stationarity");
    u.structural.diversity = text::require_double(f[9], "diversity");
    u.structural.predictability = text::require_double(f[10], "predictability");
    u.structural.n_succ_ret = text::require_int<std::size_t>(f[11], "n_succ_ret");
    u.structural.n_succ_expl = text::require_int<std::size_t>(f[12], "n_succ_expl");
    u.social.popularity_influence = text::require_double(f[13], "popularity_influence");
    u.social.flow_measurement = text::require_double(f[14], "flow_measurement");
    rows.push_back(std::move(u));
  }
  return rows;
}

inline constexpr std::string_view kPopularityHeader = "cell_code,slot,users";
inline constexpr std::string_view kFlowHeader = "from_cell,to_cell,slot,users";

inline void write_popularity_csv(std::ostream& out, const PopularityTable& t, const CellCatalog& catalog) {
  std::vector<std::tuple<std::string, int, std::uint32_t>> rows;
  rows.reserve(t.counts.size());
  for (const auto& [k, c] : t.counts)
    rows.emplace_back(catalog.code(static_cast<CellId>(k >> 16)), static_cast<int>(k & 0xFFFF), c);
  std::sort(rows.begin(), rows.end());
  out << kPopularityHeader << '\n';
  for (const auto& [code, slot, c] : rows) out << code << ',' << slot << ',' << c << '\n';
}

inline void write_flow_csv(std::ostream& out, const FlowTable& t, const CellCatalog& catalog) {
  std::vector<std::tuple<std::string, std::string, int, std::uint32_t>> rows;
  rows.reserve(t.counts.size());
  for (const auto& [k, c] : t.counts)
    rows.emplace_back(catalog.code(static_cast<CellId>(k >> 40)),
                      catalog.code(static_cast<CellId>((k >> 16) & 0xFFFFFF)), static_cast<int>(k & 0xFFFF), c);
  std::sort(rows.begin(), rows.end());
  out << kFlowHeader << '\n';
  for (const auto& [from, to, slot, c] : rows) out << from << ',' << to << ',' << slot << ',' << c << '\n';
}

namespace detail {
inline CellId require_cell(const CellCatalog& catalog, std::string_view code, std::size_t lineno) {
  auto id = catalog.find(std::string(code));
  if (!id) throw InputError("table line " + std::to_string(lineno) + ": unknown cell '" + std::string(code) + "'");
  return *id;
}
}  // namespace detail

inline PopularityTable read_popularity_csv(std::istream& in, const CellCatalog& catalog, std::string province) {
  text::expect_header(in, kPopularityHeader, "popularity table");
  PopularityTable t;
  t.province = std::move(province);
  std::string line;
  std::vector<std::string_view> f;
  std::size_t lineno = 1;
  while (text::read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    text::split(line, ',', f);
    if (f.size() != 3) throw InputError("popularity table line " + std::to_string(lineno) + ": expected 3 fields");
    const auto cell = detail::require_cell(catalog, f[0], lineno);
    t.counts[popularity_key(cell, text::require_int<int>(f[1], "slot"))] = text::require_int<std::uint32_t>(f[2], "users");
  }
  return t;
}

inline FlowTable read_flow_csv(std::istream& in, const CellCatalog& catalog, std::string province) {
  text::expect_header(in, kFlowHeader, "flow table");
  FlowTable t;
  t.province = std::move(province);
  std::string line;
  std::vector<std::string_view> f;
  std::size_t lineno = 1;
  while (text::read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    text::split(line, ',', f);
    if (f.size() != 4) throw InputError("flow table line " + std::to_string(lineno) + ": expected 4 fields");
    const auto from = detail::require_cell(catalog, f[0], lineno);
    const auto to = detail::require_cell(catalog, f[1], lineno);
    t.counts[flow_key(from, to, text::require_int<int>(f[2], "slot"))] = text::require_int<std::uint32_t>(f[3], "users");
  }
  return t;
}

}  // namespace xdrmob
