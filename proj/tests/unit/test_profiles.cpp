#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "naive.hpp"
#include "xdrmob/clustering.hpp"
#include "xdrmob/forest.hpp"
#include "xdrmob/profiles.hpp"

using namespace xdrmob;

namespace {

Matrix random_points(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) x(i, c) = g(rng);
  return x;
}

/// Ward heights by greedy global-minimum merging with the Lance-Williams
/// update on an explicit distance matrix.
std::vector<double> lance_williams_heights(const Matrix& x) {
  const std::size_t n = x.rows();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = 0.5 * squared_distance(x.row(i), x.row(j));
  std::vector<double> size(n, 1.0);
  std::vector<bool> alive(n, true);
  std::vector<double> heights;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (alive[i] && alive[j] && d[i][j] < best) best = d[i][j], bi = i, bj = j;
    heights.push_back(best);
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double nk = size[k], ni = size[bi], nj = size[bj];
      d[bi][k] = d[k][bi] = ((ni + nk) * d[bi][k] + (nj + nk) * d[bj][k] - nk * d[bi][bj]) / (ni + nj + nk);
    }
    size[bi] += size[bj];
    alive[bj] = false;
  }
  return heights;
}

UserFeatures traffic_user(double events, double volume) {
  UserFeatures u;
  u.traffic.avg_events_per_day = events;
  u.traffic.avg_session_volume = volume;
  return u;
}

UserFeatures mobility_user(std::size_t ret, std::size_t expl) {
  UserFeatures u;
  u.structural.n_succ_ret = ret;
  u.structural.n_succ_expl = expl;
  return u;
}

}  // namespace

TEST(Ward, HeightsMatchLanceWilliams) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto x = random_points(seed, 40 + seed * 7, 3);
    const auto merges = ward_linkage(x);
    auto want = lance_williams_heights(x);
    std::sort(want.begin(), want.end());
    ASSERT_EQ(merges.size(), want.size());
    for (std::size_t m = 0; m < want.size(); ++m)
      EXPECT_LE(naive::relative_error(merges[m].height, want[m]), 1e-9) << "merge " << m;
  }
}

TEST(Ward, HeightsAreSortedAndSumToTotalVariance) {
  const auto x = random_points(9, 50, 2);
  const auto merges = ward_linkage(x);
  double total = 0.0;
  for (std::size_t m = 0; m < merges.size(); ++m) {
    total += merges[m].height;
    if (m > 0) { EXPECT_LE(merges[m - 1].height, merges[m].height); }
  }
  // Sum of Ward increments equals the total within-cluster sum of squares.
  double mean[2] = {0, 0}, ss = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) mean[0] += x(i, 0) / 50, mean[1] += x(i, 1) / 50;
  for (std::size_t i = 0; i < x.rows(); ++i) ss += std::pow(x(i, 0) - mean[0], 2) + std::pow(x(i, 1) - mean[1], 2);
  EXPECT_NEAR(total, ss, 1e-9 * ss);
}

TEST(Ward, CutRecoversSeparatedGroups) {
  Matrix x(30, 2);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.1);
  for (std::size_t i = 0; i < 30; ++i) {
    x(i, 0) = static_cast<double>(i % 3) * 10 + g(rng);
    x(i, 1) = g(rng);
  }
  const auto labels = cut_tree(30, ward_linkage(x), 3);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(labels[i], labels[i % 3]);
  EXPECT_NE(labels[0], labels[1]);
  EXPECT_NE(labels[1], labels[2]);
  EXPECT_NE(labels[0], labels[2]);
}

TEST(KMeans, FindsSeparatedGroupsAndInertiaDecreases) {
  Matrix x(60, 2);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.2);
  for (std::size_t i = 0; i < 60; ++i) {
    x(i, 0) = (i % 3 == 1 ? 8.0 : 0.0) + g(rng);
    x(i, 1) = (i % 3 == 2 ? 8.0 : 0.0) + g(rng);
  }
  const auto r = kmeans(x, 3, 5, 17);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(r.labels[i], r.labels[i % 3]);
  for (std::size_t it = 1; it < r.history.size(); ++it) EXPECT_LE(r.history[it], r.history[it - 1] + 1e-12);
  const auto again = kmeans(x, 3, 5, 17);
  EXPECT_EQ(again.labels, r.labels);
}

TEST(KMeans, TooFewDistinctRowsIsDegenerate) {
  Matrix x(5, 1);
  x(0, 0) = 1.0;
  EXPECT_THROW(kmeans(x, 3, 2, 1), DegeneratePopulationError);
}

TEST(Zscore, CentersAndScalesColumns) {
  const auto z = zscore(random_points(6, 100, 3));
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 100; ++i) m += z(i, c) / 100;
    for (std::size_t i = 0; i < 100; ++i) v += (z(i, c) - m) * (z(i, c) - m) / 100;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(TrafficProfiles, QuadrantsGetMatchingNames) {
  std::vector<UserFeatures> users;
  std::vector<TrafficProfile> want;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  for (int i = 0; i < 80; ++i) {
    const bool frequent = i % 4 >= 2, heavy = i % 2 == 1;
    users.push_back(traffic_user((frequent ? 30.0 : 2.0) * jitter(rng), (heavy ? 1e7 : 1e3) * jitter(rng)));
    want.push_back(heavy ? (frequent ? TrafficProfile::HF : TrafficProfile::HO)
                         : (frequent ? TrafficProfile::LF : TrafficProfile::LO));
  }
  EXPECT_EQ(traffic_profiles(users), want);
}

TEST(TrafficProfiles, SubsampledTreeKeepsQuadrants) {
  std::vector<UserFeatures> users;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  for (int i = 0; i < 200; ++i)
    users.push_back(traffic_user((i % 4 >= 2 ? 30.0 : 2.0) * jitter(rng), (i % 2 ? 1e7 : 1e3) * jitter(rng)));
  ProfileOptions opt;
  opt.dendrogram_cap = 40;
  const auto capped = traffic_profiles(users, opt);
  EXPECT_EQ(capped, traffic_profiles(users));
}

TEST(TrafficProfiles, IdenticalUsersAreDegenerate) {
  std::vector<UserFeatures> users(10, traffic_user(3.0, 100.0));
  users[1] = traffic_user(4.0, 100.0);
  EXPECT_THROW(traffic_profiles(users), DegeneratePopulationError);
  EXPECT_THROW(traffic_profiles(std::vector<UserFeatures>(2)), DegeneratePopulationError);
}

TEST(MobilityProfiles, ClustersNamedByCentroids) {
  std::vector<UserFeatures> users;
  std::vector<MobilityProfile> want;
  for (std::size_t i = 0; i < 90; ++i) {
    switch (i % 3) {
      case 0: users.push_back(mobility_user(100 + i % 5, 2)), want.push_back(MobilityProfile::routiner); break;
      case 1: users.push_back(mobility_user(40, 12 + i % 4)), want.push_back(MobilityProfile::regular); break;
      default: users.push_back(mobility_user(5 + i % 3, 60)), want.push_back(MobilityProfile::scouter); break;
    }
  }
  EXPECT_EQ(mobility_profiles(users), want);
}

TEST(MobilityProfiles, LabelRuleOnCentroids) {
  Matrix c(3, 2);
  c(0, 0) = 10, c(0, 1) = 50;
  c(1, 0) = 5, c(1, 1) = 1;
  c(2, 0) = 90, c(2, 1) = 60;  // scouter despite the most returns
  const auto names = label_mobility_clusters(c);
  EXPECT_EQ(names[2], MobilityProfile::scouter);
  EXPECT_EQ(names[0], MobilityProfile::routiner);
  EXPECT_EQ(names[1], MobilityProfile::regular);
}

TEST(Profiles, CsvRoundTrip) {
  const std::vector<ProfileAssignment> rows{{"a", TrafficProfile::HF, MobilityProfile::scouter},
                                            {"b", TrafficProfile::LO, MobilityProfile::routiner}};
  std::stringstream s;
  write_profiles_csv(s, rows);
  const auto back = read_profiles_csv(s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].traffic, TrafficProfile::HF);
  EXPECT_EQ(back[1].mobility, MobilityProfile::routiner);
  EXPECT_THROW(parse_traffic_profile("XX"), InputError);
}

TEST(Forest, InformativeFeatureRanksFirst) {
  const std::size_t n = 300;
  auto x = random_points(12, n, 5);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 3) > 0.3 ? 1 : (x(i, 3) < -0.3 ? 2 : 0);
  ForestOptions opt;
  opt.n_trees = 40;
  const auto imp = gini_importance(x, y, opt);
  EXPECT_NEAR(std::accumulate(imp.begin(), imp.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(std::max_element(imp.begin(), imp.end()) - imp.begin(), 3);
  for (double v : imp) EXPECT_GE(v, 0.0);

  opt.threads = 3;
  EXPECT_EQ(gini_importance(x, y, opt), imp);
}

TEST(Forest, RejectsBadLabels) {
  const auto x = random_points(1, 10, 2);
  EXPECT_THROW(gini_importance(x, std::vector<int>(10, 1)), InputError);
  EXPECT_THROW(gini_importance(x, std::vector<int>(9, 1)), InputError);
}

TEST(Forest, ImportanceNeedsEnoughUsers) {
  std::vector<UserFeatures> users(50);
  std::vector<TrafficProfile> labels(50, TrafficProfile::LO);
  EXPECT_THROW(feature_importance(users, labels), InputError);
}
