#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "naive.hpp"
#include "random_users.hpp"
#include "xdrmob/entropy.hpp"
#include "xdrmob/features.hpp"
#include "xdrmob/geo.hpp"

using namespace xdrmob;

namespace {

UserSequence user_from(const std::string& id, const std::vector<std::pair<int, CellId>>& visits, const CellCatalog& c) {
  UserSequence u;
  u.user_id = id;
  u.province = "P";
  for (auto [slot, cell] : visits) {
    Event e;
    e.slot = slot;
    e.volume = 100;
    e.cell_id = cell;
    e.cell = c.code(cell);
    u.events.push_back(e);
  }
  return u;
}

CellCatalog line_catalog(int n) {
  CellCatalog c;
  for (int i = 0; i < n; ++i) c.add("L" + std::to_string(i), {0.01 * i, 0.0, "P"});
  return c;
}

std::vector<int> ints(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Geo, HaversineExamples) {
  EXPECT_EQ(haversine_km({10, 20}, {10, 20}), 0.0);
  EXPECT_NEAR(haversine_km({0, 0}, {1, 0}), 111.195, 1e-3);
  EXPECT_NEAR(haversine_km({0, 0}, {0, 1}), 111.195, 1e-3);
}

TEST(Geo, HaversineAgreesWithIndependentFormula) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
  for (int i = 0; i < 500; ++i) {
    const LatLon a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
    const double d = haversine_km(a, b);
    EXPECT_NEAR(d, naive::distance_km(a.lat, a.lon, b.lat, b.lon), 1e-6);
    EXPECT_DOUBLE_EQ(d, haversine_km(b, a));
  }
}

TEST(Geo, TwoPointGyrationIsHalfTheDistance) {
  const double dlat = 10.0 / (kEarthRadiusKm * std::numbers::pi / 180.0);
  const std::vector<LatLon> pts{{-33.0, -70.0}, {-33.0 + dlat, -70.0}};
  EXPECT_NEAR(radius_of_gyration_km(pts), 5.0, 1e-9);
}

TEST(Traffic, AveragesOverActiveSlots) {
  UserSequence u;
  u.events = {{1, 2000, "A", 0}, {2, 0, "", kNoCell}, {9, 4000, "A", 0}};
  const auto f = traffic_features(u);
  EXPECT_DOUBLE_EQ(f.avg_events_per_day, 2.0 / 7.0);
  EXPECT_DOUBLE_EQ(f.avg_session_volume, 3000.0);
  EXPECT_EQ(traffic_features(UserSequence{}).avg_session_volume, 0.0);
}

TEST(Spatial, RepeatedVisitsPullEventGyrationIn) {
  const auto c = line_catalog(2);
  const std::vector<CellId> cells{0, 0, 0, 1};
  const auto f = spatial_features(cells, c);
  EXPECT_LT(f.rg_event_km, f.rg_unique_km);
  EXPECT_NEAR(f.avg_step_distance_km, haversine_km(c.position(0), c.position(1)) / 3.0, 1e-12);
}

TEST(Spatial, SingleLocationHasZeroSpread) {
  const auto c = line_catalog(1);
  const std::vector<CellId> cells{0, 0, 0};
  const auto f = spatial_features(cells, c);
  EXPECT_EQ(f.rg_unique_km, 0.0);
  EXPECT_EQ(f.avg_step_distance_km, 0.0);
}

TEST(Structural, ConstantSequence) {
  const auto s = ints("AAAA");
  const auto f = structural_features(std::span<const int>(s));
  EXPECT_DOUBLE_EQ(f.repetitiveness, 0.75);
  EXPECT_DOUBLE_EQ(f.stationarity, 1.0);
  EXPECT_DOUBLE_EQ(f.diversity, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(f.predictability, 1.0);
  EXPECT_EQ(f.n_succ_ret, 2u);
  EXPECT_EQ(f.n_succ_expl, 0u);
}

TEST(Structural, AllDistinctSequence) {
  const auto s = ints("ABCD");
  const auto f = structural_features(std::span<const int>(s));
  EXPECT_DOUBLE_EQ(f.repetitiveness, 0.0);
  EXPECT_DOUBLE_EQ(f.stationarity, 0.0);
  EXPECT_DOUBLE_EQ(f.diversity, 1.0);
  EXPECT_EQ(f.n_succ_ret, 0u);
  EXPECT_EQ(f.n_succ_expl, 2u);
  EXPECT_FALSE(f.predictability_defined);
}

TEST(Structural, ReturnAndExplorationRuns) {
  // labels from the second event: E E R R E R
  const auto s = ints("ABCABDA");
  const auto f = structural_features(std::span<const int>(s));
  EXPECT_EQ(f.n_succ_ret, 1u);
  EXPECT_EQ(f.n_succ_expl, 1u);
}

TEST(Structural, DiversityWindowThree) {
  const auto s = ints("ABABAB");
  EXPECT_DOUBLE_EQ(diversity(std::span<const int>(s), 3), 2.0 / 4.0);
  const auto p = prefix_diversity(std::span<const int>(s), 2);
  EXPECT_EQ(p[0], 0.0);
  EXPECT_DOUBLE_EQ(p[1], 1.0);
  EXPECT_DOUBLE_EQ(p[5], diversity(std::span<const int>(s), 2));
}

TEST(Structural, InvariantsOnRandomSequences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::uniform_int_distribution<int> len(1, 60), sym(0, trial % 6);
    std::vector<int> s(static_cast<std::size_t>(len(rng)));
    for (auto& x : s) x = sym(rng);
    const auto f = structural_features(std::span<const int>(s));
    const std::set<int> distinct(s.begin(), s.end());
    EXPECT_NEAR(f.repetitiveness + static_cast<double>(distinct.size()) / static_cast<double>(s.size()), 1.0, 1e-12);
    if (s.size() >= 2) { EXPECT_EQ(f.stationarity == 1.0, distinct.size() == 1); }
    for (double v : {f.repetitiveness, f.stationarity, f.diversity, f.predictability}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    if (f.predictability_defined) { EXPECT_GE(f.predictability, 1.0 / static_cast<double>(distinct.size()) - 1e-12); }
  }
}

TEST(Entropy, MatchLengthsAgreeWithBruteForce) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> len(0, 70), sym(0, 1 + trial % 5);
    std::vector<int> s(static_cast<std::size_t>(len(rng)));
    for (auto& x : s) x = sym(rng);
    EXPECT_EQ(match_lengths(std::span<const int>(s)), naive::match_lengths(s));
    EXPECT_NEAR(entropy_rate(std::span<const int>(s)), naive::entropy(s), 1e-12);
  }
}

TEST(Entropy, ShortSequencesHaveZeroEntropy) {
  const std::vector<int> one{4};
  EXPECT_EQ(entropy_rate(std::span<const int>(one)), 0.0);
}

TEST(Entropy, FanoInversion) {
  EXPECT_EQ(fano_predictability(0.0, 5), 1.0);
  EXPECT_DOUBLE_EQ(fano_predictability(std::log2(5.0), 5), 0.2);
  EXPECT_DOUBLE_EQ(fano_predictability(10.0, 5), 0.2);
  EXPECT_EQ(fano_predictability(0.7, 1), 1.0);
  for (double h : {0.1, 0.5, 1.0, 1.7, 2.2}) {
    const double p = fano_predictability(h, 6);
    EXPECT_NEAR(binary_entropy(p) + (1 - p) * std::log2(5.0), h, 1e-10);
    EXPECT_NEAR(p, naive::predictability(h, 6), 1e-12);
  }
  EXPECT_GT(fano_predictability(0.5, 6), fano_predictability(1.5, 6));
}

TEST(Social, CountsDistinctUsersPerSlot) {
  const auto c = line_catalog(3);
  std::vector<UserSequence> users{user_from("a", {{1, 0}, {2, 1}}, c), user_from("b", {{1, 0}, {2, 1}}, c),
                                  user_from("c", {{1, 0}, {2, 2}}, c), user_from("d", {{1, 2}}, c)};
  const auto t = build_population_tables(users, "P");
  EXPECT_EQ(t.popularity.at(0, 1), 3u);
  EXPECT_EQ(t.popularity.at(2, 1), 1u);
  EXPECT_EQ(t.flow.at(0, 1, 1), 2u);
  EXPECT_EQ(t.flow.at(0, 2, 1), 1u);
  const auto f = social_features(users[0], t.popularity, t.flow);
  EXPECT_DOUBLE_EQ(f.popularity_influence, (3.0 + 2.0) / 2.0);
  EXPECT_DOUBLE_EQ(f.flow_measurement, 2.0);
  const auto alone = social_features(users[3], t.popularity, t.flow);
  EXPECT_DOUBLE_EQ(alone.popularity_influence, 1.0);
  EXPECT_EQ(alone.flow_measurement, 0.0);
}

TEST(Social, MissingTableEntryIsAConsistencyError) {
  const auto c = line_catalog(2);
  const auto u = user_from("a", {{1, 0}, {2, 1}}, c);
  EXPECT_THROW(social_features(u, PopularityTable{}, FlowTable{}), ConsistencyError);
}

TEST(Social, TablesIndependentOfUserOrder) {
  auto p = testing_support::random_province(3, 80, 40);
  const auto a = build_population_tables(p.users, "Test");
  std::mt19937_64 rng(9);
  std::shuffle(p.users.begin(), p.users.end(), rng);
  const auto b = build_population_tables(p.users, "Test");
  EXPECT_EQ(a.popularity.counts, b.popularity.counts);
  EXPECT_EQ(a.flow.counts, b.flow.counts);
}

TEST(Social, TablesRoundTripThroughCsv) {
  const auto p = testing_support::random_province(4, 40, 30);
  const auto t = build_population_tables(p.users, "Test");
  std::stringstream ps, fs;
  write_popularity_csv(ps, t.popularity, p.catalog);
  write_flow_csv(fs, t.flow, p.catalog);
  EXPECT_EQ(read_popularity_csv(ps, p.catalog, "Test").counts, t.popularity.counts);
  EXPECT_EQ(read_flow_csv(fs, p.catalog, "Test").counts, t.flow.counts);
}

TEST(Features, AgreeWithIndependentComputation) {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    const auto p = testing_support::random_province(seed, 60, 70);
    const auto tables = build_population_tables(p.users, "Test");
    const auto rows = compute_all_features(p.users, p.catalog, tables, {}, 2);
    for (std::size_t i = 0; i < p.users.size(); ++i) {
      const auto& f = rows[i];
      const auto want = naive::features(p.users, i, p.catalog).values();
      const std::vector<double> got{f.traffic.avg_events_per_day,
                                    f.traffic.avg_session_volume,
                                    f.spatial.avg_step_distance_km,
                                    f.spatial.rg_unique_km,
                                    f.spatial.rg_event_km,
                                    f.structural.repetitiveness,
                                    f.structural.stationarity,
                                    f.structural.diversity,
                                    f.structural.predictability,
                                    static_cast<double>(f.structural.n_succ_ret),
                                    static_cast<double>(f.structural.n_succ_expl),
                                    f.social.popularity_influence,
                                    f.social.flow_measurement};
      for (std::size_t k = 0; k < got.size(); ++k) {
        // Distances between nearly coincident points lose digits in either
        // formula, so spatial values get an absolute floor.
        const bool spatial = k >= 2 && k <= 4;
        if (spatial && std::abs(got[k] - want[k]) < 1e-9) continue;
        EXPECT_LE(naive::relative_error(got[k], want[k]), 1e-9) << "user " << i << " feature " << k;
      }
    }
  }
}

TEST(Features, CsvRoundTrip) {
  const auto p = testing_support::random_province(8, 20, 40);
  const auto tables = build_population_tables(p.users, "Test");
  const auto rows = compute_all_features(p.users, p.catalog, tables);
  std::stringstream s;
  write_features_csv(s, rows);
  const auto back = read_features_csv(s);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].user_id, rows[i].user_id);
    EXPECT_DOUBLE_EQ(back[i].spatial.rg_event_km, rows[i].spatial.rg_event_km);
    EXPECT_DOUBLE_EQ(back[i].social.flow_measurement, rows[i].social.flow_measurement);
    EXPECT_EQ(back[i].structural.n_succ_ret, rows[i].structural.n_succ_ret);
  }
}

TEST(Features, ThreadCountDoesNotChangeResults) {
  const auto p = testing_support::random_province(12, 50, 50);
  const auto tables = build_population_tables(p.users, "Test");
  std::stringstream a, b;
  write_features_csv(a, compute_all_features(p.users, p.catalog, tables, {}, 1));
  write_features_csv(b, compute_all_features(p.users, p.catalog, tables, {}, 4));
  EXPECT_EQ(a.str(), b.str());
}
