#pragma once

// User-level profiles: traffic {LO, LF, HO, HF} from hierarchical clustering
// of usage, mobility {routiner, regular, scouter} from k-means on successive
// returns/explorations, and Gini importance of mobility features for the
// traffic labels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xdrmob/clustering.hpp"
#include "xdrmob/error.hpp"
#include "xdrmob/features.hpp"
#include "xdrmob/forest.hpp"
#include "xdrmob/text.hpp"

namespace xdrmob {

enum class TrafficProfile { LO, LF, HO, HF };
enum class MobilityProfile { routiner, regular, scouter };

inline std::string_view to_string(TrafficProfile p) {
  switch (p) {
    case TrafficProfile::LO: return "LO";
    case TrafficProfile::LF: return "LF";
    case TrafficProfile::HO: return "HO";
    case TrafficProfile::HF: return "HF";
  }
  return "?";
}

inline std::string_view to_string(MobilityProfile p) {
  switch (p) {
    case MobilityProfile::routiner: return "routiner";
    case MobilityProfile::regular: return "regular";
    case MobilityProfile::scouter: return "scouter";
  }
  return "?";
}

inline TrafficProfile parse_traffic_profile(std::string_view s) {
  if (s == "LO") return TrafficProfile::LO;
  if (s == "LF") return TrafficProfile::LF;
  if (s == "HO") return TrafficProfile::HO;
  if (s == "HF") return TrafficProfile::HF;
  throw InputError("unknown traffic profile '" + std::string(s) + "'");
}

inline MobilityProfile parse_mobility_profile(std::string_view s) {
  if (s == "routiner") return MobilityProfile::routiner;
  if (s == "regular") return MobilityProfile::regular;
  if (s == "scouter") return MobilityProfile::scouter;
  throw InputError("unknown mobility profile '" + std::string(s) + "'");
}

struct ProfileAssignment {
  std::string user_id;
  TrafficProfile traffic = TrafficProfile::LO;
  MobilityProfile mobility = MobilityProfile::regular;
};

struct ProfileOptions {
  std::size_t traffic_clusters = 4;
  std::size_t dendrogram_cap = 20000;
  std::size_t kmeans_restarts = 50;
  std::uint64_t seed = 42;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Clustering space for traffic profiles: (events/day, log10(1 + volume)).
inline Matrix traffic_space(std::span<const UserFeatures> users) {
  Matrix x(users.size(), 2);
  for (std::size_t i = 0; i < users.size(); ++i) {
    x(i, 0) = users[i].traffic.avg_events_per_day;
    x(i, 1) = std::log10(1.0 + users[i].traffic.avg_session_volume);
  }
  return x;
}

/// Ward clusters on the z-scored traffic space, cut at k. Above the dendrogram
/// cap, a seeded subsample builds the tree and the rest join the nearest
/// cluster centroid.
inline std::vector<int> traffic_clusters(const Matrix& z, const ProfileOptions& opt) {
  const std::size_t n = z.rows();
  const std::size_t k = opt.traffic_clusters;
  if (count_distinct_rows(z) < k)
    throw DegeneratePopulationError("traffic profiles: fewer than " + std::to_string(k) + " distinct users");
  if (n <= opt.dendrogram_cap) return cut_tree(n, ward_linkage(z), k);

  std::vector<std::size_t> pick(n);
  std::iota(pick.begin(), pick.end(), 0);
  std::mt19937_64 rng(opt.seed);
  std::shuffle(pick.begin(), pick.end(), rng);
  pick.resize(opt.dendrogram_cap);
  std::sort(pick.begin(), pick.end());
  Matrix sub(pick.size(), z.cols());
  for (std::size_t i = 0; i < pick.size(); ++i) std::copy(z.row(pick[i]).begin(), z.row(pick[i]).end(), sub.row(i).begin());
  if (count_distinct_rows(sub) < k) throw DegeneratePopulationError("traffic profiles: degenerate subsample");
  const auto sub_labels = cut_tree(sub.rows(), ward_linkage(sub), k);
  const Matrix centers = cluster_centroids(sub, sub_labels, k);
  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < pick.size(); ++i) labels[pick[i]] = sub_labels[i];
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < 0) labels[i] = static_cast<int>(nearest_row(centers, z.row(i)));
  return labels;
}

/// Heavy/Light from the cluster's mean log-volume against the population
/// median, Frequent/Occasional from its mean events/day likewise.
inline std::vector<TrafficProfile> label_traffic_clusters(const Matrix& x, std::span<const int> labels, std::size_t k) {
  std::vector<double> events(x.rows()), volume(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    events[i] = x(i, 0);
    volume[i] = x(i, 1);
  }
  const double med_events = median(events);
  const double med_volume = median(volume);
  const Matrix c = cluster_centroids(x, labels, k);
  std::vector<TrafficProfile> out(k);
  for (std::size_t l = 0; l < k; ++l) {
    const bool heavy = c(l, 1) > med_volume;
    const bool frequent = c(l, 0) > med_events;
    out[l] = heavy ? (frequent ? TrafficProfile::HF : TrafficProfile::HO)
                   : (frequent ? TrafficProfile::LF : TrafficProfile::LO);
  }
  return out;
}

inline std::vector<TrafficProfile> traffic_profiles(std::span<const UserFeatures> users, const ProfileOptions& opt = {}) {
  if (users.size() < opt.traffic_clusters)
    throw DegeneratePopulationError("traffic profiles: need at least " + std::to_string(opt.traffic_clusters) + " users");
  const Matrix x = traffic_space(users);
  const auto labels = traffic_clusters(zscore(x), opt);
  const auto names = label_traffic_clusters(x, labels, opt.traffic_clusters);
  std::vector<TrafficProfile> out(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) out[i] = names[static_cast<std::size_t>(labels[i])];
  return out;
}

inline Matrix mobility_space(std::span<const UserFeatures> users) {
  Matrix x(users.size(), 2);
  for (std::size_t i = 0; i < users.size(); ++i) {
    x(i, 0) = static_cast<double>(users[i].structural.n_succ_ret);
    x(i, 1) = static_cast<double>(users[i].structural.n_succ_expl);
  }
  return x;
}

/// scouter = highest centroid explorations, routiner = highest centroid returns
/// among the other two, regular = the remaining cluster.
inline std::array<MobilityProfile, 3> label_mobility_clusters(const Matrix& centroids) {
  std::array<MobilityProfile, 3> out{MobilityProfile::regular, MobilityProfile::regular, MobilityProfile::regular};
  std::size_t scouter = 0;
  for (std::size_t c = 1; c < 3; ++c)
    if (centroids(c, 1) > centroids(scouter, 1)) scouter = c;
  std::size_t routiner = scouter == 0 ? 1 : 0;
  for (std::size_t c = 0; c < 3; ++c)
    if (c != scouter && centroids(c, 0) > centroids(routiner, 0)) routiner = c;
  out[scouter] = MobilityProfile::scouter;
  out[routiner] = MobilityProfile::routiner;
  return out;
}

inline std::vector<MobilityProfile> mobility_profiles(std::span<const UserFeatures> users,
                                                      const ProfileOptions& opt = {}) {
  if (users.size() < 3) throw DegeneratePopulationError("mobility profiles: need at least 3 users");
  const Matrix z = zscore(mobility_space(users));
  const auto km = kmeans(z, 3, opt.kmeans_restarts, opt.seed);
  const auto names = label_mobility_clusters(km.centroids);
  std::vector<MobilityProfile> out(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) out[i] = names[static_cast<std::size_t>(km.labels[i])];
  return out;
}

inline const std::array<std::string_view, 11>& mobility_feature_names() {
  static const std::array<std::string_view, 11> names{
      "avg_step_distance_km", "rg_unique_km", "rg_event_km",  "repetitiveness",       "stationarity",    "diversity",
      "predictability",       "n_succ_ret",   "n_succ_expl", "popularity_influence", "flow_measurement"};
  return names;
}

inline Matrix mobility_feature_matrix(std::span<const UserFeatures> users) {
  Matrix x(users.size(), 11);
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& u = users[i];
    const double row[11] = {u.spatial.avg_step_distance_km,
                            u.spatial.rg_unique_km,
                            u.spatial.rg_event_km,
                            u.structural.repetitiveness,
                            u.structural.stationarity,
                            u.structural.diversity,
                            u.structural.predictability,
                            static_cast<double>(u.structural.n_succ_ret),
                            static_cast<double>(u.structural.n_succ_expl),
                            u.social.popularity_influence,
                            u.social.flow_measurement};
    std::copy(std::begin(row), std::end(row), x.row(i).begin());
  }
  return x;
}

struct FeatureImportance {
  std::string feature;
  double importance = 0.0;
};

inline constexpr std::size_t kMinImportanceUsers = 100;

/// Importance of the 11 mobility features for predicting traffic profiles,
/// sorted descending (ties by name).
inline std::vector<FeatureImportance> feature_importance(std::span<const UserFeatures> users,
                                                         std::span<const TrafficProfile> labels,
                                                         const ForestOptions& opt = {}) {
  if (users.size() < kMinImportanceUsers)
    throw InputError("feature importance: need at least " + std::to_string(kMinImportanceUsers) + " labeled users");
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = static_cast<int>(labels[i]);
  const auto imp = gini_importance(mobility_feature_matrix(users), y, opt);
  std::vector<FeatureImportance> out;
  for (std::size_t f = 0; f < imp.size(); ++f) out.push_back({std::string(mobility_feature_names()[f]), imp[f]});
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.feature < b.feature;
  });
  return out;
}

inline constexpr std::string_view kProfilesHeader = "user_id,traffic_profile,mobility_profile";

inline void write_profiles_csv(std::ostream& out, std::span<const ProfileAssignment> rows) {
  out << kProfilesHeader << '\n';
  for (const auto& r : rows) out << r.user_id << ',' << to_string(r.traffic) << ',' << to_string(r.mobility) << '\n';
}

inline std::vector<ProfileAssignment> read_profiles_csv(std::istream& in) {
  text::expect_header(in, kProfilesHeader, "profiles.csv");
  std::vector<ProfileAssignment> rows;
  std::string line;
  std::vector<std::string_view> f;
  while (text::read_line(in, line)) {
    if (line.empty()) continue;
    text::split(line, ',', f);
    if (f.size() != 3) throw InputError("profiles.csv: expected 3 fields");
    rows.push_back({std::string(f[0]), parse_traffic_profile(f[1]), parse_mobility_profile(f[2])});
  }
  return rows;
}

inline void write_importance_csv(std::ostream& out, std::span<const FeatureImportance> rows) {
  out << "feature,importance\n";
  for (const auto& r : rows) out << r.feature << ',' << text::format_double(r.importance) << '\n';
}

}  // namespace xdrmob
