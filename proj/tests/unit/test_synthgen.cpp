#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "xdrmob/eval.hpp"
#include "xdrmob/features.hpp"
#include "xdrmob/synthgen.hpp"

using namespace xdrmob;

namespace {

GeneratorSpec small_spec() {
  GeneratorSpec s;
  s.n_users = 90;
  s.n_cells = 144;
  s.seed = 7;
  return s;
}

std::string xdr_text(const SyntheticPopulation& pop) {
  std::ostringstream out;
  write_xdr(out, pop.users, false);
  return out.str();
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(Generator, OutputParsesCleanly) {
  const auto pop = generate(small_spec());
  std::istringstream in(xdr_text(pop));
  const auto parsed = parse_xdr(in, pop.catalog);
  EXPECT_TRUE(parsed.errors.empty());
  EXPECT_EQ(parsed.records, 90u * kSlotsPerWeek);
  EXPECT_EQ(parsed.duplicate_slots, 0u);
  const auto d = preprocess(parsed, pop.catalog);
  EXPECT_EQ(d.summary.accepted, 90u);
  EXPECT_EQ(d.summary.imputed_events, 0u);
  EXPECT_EQ(d.summary.full_sequence, 45u);
  for (const auto& t : pop.truth) {
    const auto& users = d.provinces.at("P01");
    const auto it = std::find_if(users.begin(), users.end(), [&](const UserSequence& u) { return u.user_id == t.user_id; });
    ASSERT_NE(it, users.end());
    EXPECT_EQ(it->full_sequence, t.full);
  }
}

TEST(Generator, FullUserCountIsExact) {
  for (double f : {0.0, 0.1, 0.37, 1.0}) {
    auto spec = small_spec();
    spec.n_users = 73;
    spec.full_fraction = f;
    const auto pop = generate(spec);
    std::size_t full = 0;
    for (const auto& t : pop.truth) full += t.full;
    EXPECT_EQ(full, static_cast<std::size_t>(std::llround(f * 73)));
  }
}

TEST(Generator, DeterministicAcrossThreads) {
  const auto a = generate(small_spec(), 1);
  const auto b = generate(small_spec(), 3);
  EXPECT_EQ(xdr_text(a), xdr_text(b));
  auto other = small_spec();
  other.seed = 8;
  EXPECT_NE(xdr_text(generate(other)), xdr_text(a));
}

TEST(Generator, ProvincesAreColumnStrips) {
  auto spec = small_spec();
  spec.n_provinces = 3;
  const auto pop = generate(spec);
  std::set<std::string> names;
  for (std::size_t k = 0; k < pop.catalog.size(); ++k) names.insert(pop.catalog.info(static_cast<CellId>(k)).province);
  EXPECT_EQ(names, (std::set<std::string>{"P01", "P02", "P03"}));
  EXPECT_EQ(pop.catalog.code(5), "C00005");
}

TEST(Generator, RoutinersStayPutMoreThanScouters) {
  auto spec = small_spec();
  spec.n_users = 240;
  const auto pop = generate(spec);
  std::vector<double> routiner, scouter;
  for (std::size_t i = 0; i < pop.users.size(); ++i) {
    const auto cells = trajectory(pop.users[i]);
    const double sta = structural_features(std::span<const CellId>(cells)).stationarity;
    if (pop.truth[i].profile == MobilityProfile::routiner) routiner.push_back(sta);
    if (pop.truth[i].profile == MobilityProfile::scouter) scouter.push_back(sta);
  }
  ASSERT_FALSE(routiner.empty());
  ASSERT_FALSE(scouter.empty());
  EXPECT_GT(mean(routiner), mean(scouter) + 0.05);
}

TEST(Generator, RejectsInvalidSpecs) {
  auto bad = small_spec();
  bad.coupling = 1.5;
  EXPECT_THROW(generate(bad), InputError);
  bad = small_spec();
  bad.profile_mix = {0.5, 0.5, 0.5};
  EXPECT_THROW(generate(bad), InputError);
  bad = small_spec();
  bad.n_users = 0;
  EXPECT_THROW(generate(bad), InputError);
  bad = small_spec();
  bad.volume_bands[1] = {10.0, 5.0};
  EXPECT_THROW(generate(bad), InputError);
}

TEST(Generator, GroundTruthJson) {
  const auto pop = generate(small_spec());
  std::stringstream s;
  write_ground_truth(s, pop);
  const auto j = nlohmann::json::parse(s.str());
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["users"].size(), 90u);
  EXPECT_EQ(j["users"]["u00000"]["pairing"], "u00000");
}

TEST(Generator, CoupledTrafficCoversAllClasses) {
  std::set<Traffic> seen;
  for (int h = 0; h < 24; ++h)
    for (int m = 0; m < kMobilityTuples; ++m) seen.insert(coupled_traffic(h, m));
  EXPECT_EQ(seen.size(), 3u);
}

TEST(BehaviorCorpus, MarginalBaseline) {
  EXPECT_NEAR(marginal_guess_baseline(kSkewedMobility), 0.265, 1e-12);
  double total = 0;
  for (double p : kSkewedMobility) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(BehaviorCorpus, FullCouplingFollowsTheMap) {
  BehaviorCorpusSpec spec;
  spec.n_users = 20;
  const auto corpus = generate_behaviors(spec);
  for (const auto& s : corpus) {
    ASSERT_EQ(s.size(), static_cast<std::size_t>(kSlotsPerWeek));
    for (const auto& b : s) EXPECT_EQ(mobility_index(b), shared_coupling((b.slot % kSlotsPerDay) / 2, b.trc));
  }
}

TEST(BehaviorCorpus, PerUserMapsAndWeeks) {
  BehaviorCorpusSpec spec;
  spec.n_users = 10;
  spec.per_user_coupling = true;
  const auto w0 = generate_behaviors(spec);
  spec.week = 1;
  const auto w1 = generate_behaviors(spec);
  EXPECT_NE(w0, w1);
  EXPECT_NE(user_coupling(spec.seed, 0), user_coupling(spec.seed, 1));
  for (std::size_t u = 0; u < 10; ++u) {
    const auto map = user_coupling(spec.seed, u);
    for (const auto* week : {&w0, &w1})
      for (const auto& b : (*week)[u])
        EXPECT_EQ(mobility_index(b), map[static_cast<std::size_t>((b.slot % kSlotsPerDay) / 2)][static_cast<std::size_t>(b.trc)]);
  }
}

TEST(BehaviorCorpus, TruePairingLikelihoodGrowsWithCoupling) {
  double previous = -1.0;
  for (double kappa : {0.0, 0.5, 1.0}) {
    BehaviorCorpusSpec spec;
    spec.n_users = 120;
    spec.coupling = kappa;
    const auto corpus = generate_behaviors(spec);
    // Shuffled pairs mostly hit unseen transitions, which only the r_t term penalizes.
    const auto model = train(corpus, MarkovConfig{TimeMode::hour, 0.5});
    const auto d = run_discrimination(model, corpus, 3);
    const double m = mean(d.regular);
    EXPECT_GE(m, previous);
    previous = m;
    if (kappa == 1.0) { EXPECT_GT(m, mean(d.shuffled)); }
  }
}

TEST(BehaviorCorpus, PredictionIsExactUnderFullCoupling) {
  BehaviorCorpusSpec spec;
  spec.n_users = 40;
  spec.length = 96;
  const auto corpus = generate_behaviors(spec);
  const auto model = train(corpus, {});
  const auto r = run_prediction(model, corpus, Direction::mobility_given_traffic, 3, 1, 2);
  EXPECT_DOUBLE_EQ(r.across_users.overall.mean, 1.0);
  EXPECT_EQ(r.per_user.size(), 40u);
  const auto again = run_prediction(model, corpus, Direction::mobility_given_traffic, 3, 1, 1);
  EXPECT_EQ(again.fallback_counts, r.fallback_counts);
}
