#pragma once

// Synthetic populations with known ground truth.
//
// generate() builds a grid-world XDR province: users move between home, work
// and explored cells, and each located event's traffic class mixes a
// deterministic function of (hour, mobility tuple) with an independent draw.
// generate_behaviors() builds step-behavior corpora directly, where mobility
// depends on (hour, traffic); it drives the model-level evaluations without
// going through tertile discretization.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "xdrmob/error.hpp"
#include "xdrmob/geo.hpp"
#include "xdrmob/ingest.hpp"
#include "xdrmob/markov.hpp"
#include "xdrmob/parallel.hpp"
#include "xdrmob/profiles.hpp"
#include "xdrmob/seed.hpp"
#include "xdrmob/step.hpp"

namespace xdrmob {

struct VolumeBand {
  double lo = 1.0;
  double hi = 1.0;
};

struct GeneratorSpec {
  std::size_t n_users = 200;
  std::size_t n_cells = 400;
  double grid_extent_km = 40.0;
  std::array<double, 3> profile_mix{0.3, 0.4, 0.3};  // routiner, regular, scouter
  double coupling = 0.5;                             // kappa
  std::array<double, 3> traffic_marginal{0.5, 0.3, 0.2};
  std::array<VolumeBand, 3> volume_bands{{{1e4, 1e5}, {1e5, 1e6}, {1e6, 1e8}}};
  double full_fraction = 0.5;  // users active in every slot
  double activity = 0.5;       // per-slot activity of the others, daytime
  std::size_t n_provinces = 1;
  double origin_lat = -33.45;
  double origin_lon = -70.65;
  // Distance classes used by the coupling map, in km.
  double close_km = 2.0;
  double far_km = 8.0;
  std::uint64_t seed = 42;
};

struct SyntheticUser {
  std::string user_id;
  MobilityProfile profile = MobilityProfile::regular;
  bool full = false;
};

struct SyntheticPopulation {
  GeneratorSpec spec;
  CellCatalog catalog;
  std::vector<UserSequence> users;  // sorted by id, all 336 slots present
  std::vector<SyntheticUser> truth;
};

inline std::string synthetic_province(std::size_t p) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02zu", p + 1);
  return buf;
}

inline std::string synthetic_cell(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%05zu", k);
  return buf;
}

inline std::string synthetic_user(std::size_t u) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%05zu", u);
  return buf;
}

/// Deterministic traffic class of a step under full coupling.
inline Traffic coupled_traffic(int hour, int mobility) {
  return static_cast<Traffic>((hour / 4 + mobility * 2 + (mobility >> 2)) % 3);
}

namespace detail {

struct Movement {
  double stay;
  double explore;
};

inline Movement movement(MobilityProfile p) {
  switch (p) {
    case MobilityProfile::routiner: return {0.85, 0.02};
    case MobilityProfile::regular: return {0.65, 0.10};
    case MobilityProfile::scouter: return {0.45, 0.35};
  }
  return {0.65, 0.10};
}

inline void validate(const GeneratorSpec& s) {
  if (s.n_users == 0) throw InputError("generator: n_users must be positive");
  if (s.n_cells == 0) throw InputError("generator: n_cells must be positive");
  if (s.n_cells >= 100000) throw InputError("generator: n_cells must be below 100000");
  if (!(s.grid_extent_km > 0.0)) throw InputError("generator: grid_extent_km must be positive");
  if (s.n_provinces == 0 || s.n_provinces > s.n_cells) throw InputError("generator: bad province count");
  if (s.coupling < 0.0 || s.coupling > 1.0) throw InputError("generator: coupling must lie in [0, 1]");
  if (s.full_fraction < 0.0 || s.full_fraction > 1.0) throw InputError("generator: full_fraction must lie in [0, 1]");
  if (s.activity <= 0.0 || s.activity > 1.0) throw InputError("generator: activity must lie in (0, 1]");
  const double mix = s.profile_mix[0] + s.profile_mix[1] + s.profile_mix[2];
  if (std::abs(mix - 1.0) > 1e-9) throw InputError("generator: profile fractions must sum to 1");
  for (const auto& b : s.volume_bands)
    if (!(b.lo >= 1.0 && b.hi >= b.lo)) throw InputError("generator: bad volume band");
}

inline CellCatalog grid_catalog(const GeneratorSpec& s, std::size_t& side) {
  side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(s.n_cells))));
  const double spacing = s.grid_extent_km / static_cast<double>(side);
  const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;
  CellCatalog c;
  for (std::size_t k = 0; k < s.n_cells; ++k) {
    const std::size_t row = k / side, col = k % side;
    const double lat = s.origin_lat + static_cast<double>(row) * spacing / km_per_deg;
    const double lon =
        s.origin_lon + static_cast<double>(col) * spacing / (km_per_deg * std::cos(deg2rad(s.origin_lat)));
    c.add(synthetic_cell(k), {lat, lon, synthetic_province(col * s.n_provinces / side)});
  }
  return c;
}

inline bool daytime(int slot) {
  const int hour = (slot % kSlotsPerDay) / 2;
  return hour >= 8 && hour < 23;
}

inline bool working_hours(int slot) {
  const int day = slot / kSlotsPerDay;  // 0 = Sunday
  const int hour = (slot % kSlotsPerDay) / 2;
  return day >= 1 && day <= 5 && hour >= 9 && hour < 18;
}

inline std::uint64_t draw_volume(const VolumeBand& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::log(b.lo), std::log(b.hi));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(std::exp(u(rng)))));
}

}  // namespace detail

inline SyntheticPopulation generate(const GeneratorSpec& spec, unsigned threads = 1) {
  detail::validate(spec);
  SyntheticPopulation pop;
  pop.spec = spec;
  std::size_t side = 0;
  pop.catalog = detail::grid_catalog(spec, side);
  const std::size_t n_cells = spec.n_cells;
  pop.users.resize(spec.n_users);
  pop.truth.resize(spec.n_users);

  parallel_for(spec.n_users, threads, [&](std::size_t ui) {
    std::mt19937_64 rng(derive_seed(spec.seed, ui));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_cell(0, n_cells - 1);

    SyntheticUser& t = pop.truth[ui];
    t.user_id = synthetic_user(ui);
    const double r = unit(rng);
    t.profile = r < spec.profile_mix[0]                         ? MobilityProfile::routiner
                : r < spec.profile_mix[0] + spec.profile_mix[1] ? MobilityProfile::regular
                                                                : MobilityProfile::scouter;
    // Exactly round(full_fraction * n_users) full users, spread over the ids.
    const auto full_before = [&](std::size_t k) {
      return static_cast<std::size_t>(std::floor(static_cast<double>(k) * spec.full_fraction + 0.5));
    };
    t.full = full_before(ui + 1) > full_before(ui);
    const auto mv = detail::movement(t.profile);

    const std::size_t home = any_cell(rng);
    const std::size_t work = any_cell(rng);
    std::vector<std::size_t> known{home, work};
    std::size_t here = home;

    // Location every slot, whether or not the user generates traffic there.
    std::vector<std::size_t> where(kSlotsPerWeek);
    for (int s = 0; s < kSlotsPerWeek; ++s) {
      const std::size_t anchor = detail::working_hours(s) ? work : home;
      const double stay = detail::daytime(s) ? mv.stay : 0.95;
      const double x = unit(rng);
      if (x < stay) {
        // stay put
      } else if (x < stay + (1.0 - stay) * mv.explore) {
        here = any_cell(rng);
        known.push_back(here);
      } else if (unit(rng) < 0.7) {
        here = anchor;
      } else {
        here = known[std::uniform_int_distribution<std::size_t>(0, known.size() - 1)(rng)];
      }
      where[static_cast<std::size_t>(s)] = here;
    }

    std::vector<char> active(kSlotsPerWeek, 1);
    if (!t.full) {
      std::size_t n_active = 0;
      for (int s = 0; s < kSlotsPerWeek; ++s) {
        const double p = detail::daytime(s) ? spec.activity : 0.3 * spec.activity;
        active[static_cast<std::size_t>(s)] = unit(rng) < p;
        n_active += active[static_cast<std::size_t>(s)];
      }
      if (n_active < 2) active[0] = active[1] = 1;
      // Never all 336 by accident: a non-full user keeps at least one idle slot.
      if (n_active == static_cast<std::size_t>(kSlotsPerWeek)) active[3] = 0;
    }

    std::vector<int> slots;
    for (int s = 0; s < kSlotsPerWeek; ++s)
      if (active[static_cast<std::size_t>(s)]) slots.push_back(s);

    UserSequence& u = pop.users[ui];
    u.user_id = t.user_id;
    u.events.resize(kSlotsPerWeek);
    for (int s = 0; s < kSlotsPerWeek; ++s) u.events[static_cast<std::size_t>(s)].slot = s;

    std::set<std::size_t> visited;
    std::discrete_distribution<int> marginal(spec.traffic_marginal.begin(), spec.traffic_marginal.end());
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const int s = slots[i];
      const std::size_t cell = where[static_cast<std::size_t>(s)];
      const bool last = i + 1 == slots.size();
      const std::size_t next = last ? cell : where[static_cast<std::size_t>(slots[i + 1])];
      const double km = haversine_km(pop.catalog.position(static_cast<CellId>(cell)),
                                     pop.catalog.position(static_cast<CellId>(next)));
      const Distance disc = km <= spec.close_km ? Distance::close : km <= spec.far_km ? Distance::medium : Distance::far;
      const bool rep = visited.count(cell) > 0;
      visited.insert(cell);
      const bool sta = cell == next;
      const int hour = (s % kSlotsPerDay) / 2;
      const Traffic trc = unit(rng) < spec.coupling ? coupled_traffic(hour, mobility_index(disc, rep, sta))
                                                    : static_cast<Traffic>(marginal(rng));
      auto& e = u.events[static_cast<std::size_t>(s)];
      e.volume = detail::draw_volume(spec.volume_bands[static_cast<std::size_t>(trc)], rng);
      e.cell_id = static_cast<CellId>(cell);
      e.cell = pop.catalog.code(e.cell_id);
    }
    u.full_sequence = is_full_sequence(u);
  });
  return pop;
}

inline void write_ground_truth(std::ostream& out, const SyntheticPopulation& pop) {
  nlohmann::json j;
  j["coupling"] = pop.spec.coupling;
  j["seed"] = pop.spec.seed;
  nlohmann::json users = nlohmann::json::object();
  for (const auto& t : pop.truth) {
    users[t.user_id] = {{"mobility_profile", std::string(to_string(t.profile))},
                        {"full_sequence", t.full},
                        {"pairing", t.user_id}};
  }
  j["users"] = std::move(users);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Behavior-level corpora

/// Mobility tuple index when coupled to (hour, traffic): nights at a
/// familiar, unchanged place; light and medium sessions likewise by day,
/// heavy ones on a far first visit. Deliberately not injective.
inline int shared_coupling(int hour, Traffic trc) {
  if (hour < 6) return mobility_index(Distance::close, true, true);
  return trc == Traffic::heavy ? mobility_index(Distance::far, false, false)
                               : mobility_index(Distance::close, true, true);
}

inline constexpr std::array<double, kMobilityTuples> kSkewedMobility{
    0.0, 0.0, 0.10, 0.45,   // c: 00 01 10 11
    0.10, 0.0, 0.15, 0.0,   // m
    0.10, 0.0, 0.10, 0.0};  // f

struct BehaviorCorpusSpec {
  std::size_t n_users = 200;
  std::size_t length = kSlotsPerWeek;  // consecutive slots from 0
  double coupling = 1.0;               // probability that mobility follows the coupling map
  bool per_user_coupling = false;      // each user draws a private map instead of shared_coupling
  std::array<double, 3> traffic_marginal{0.5, 0.3, 0.2};
  std::array<double, kMobilityTuples> mobility_marginal = kSkewedMobility;
  std::uint64_t seed = 42;
  std::uint64_t week = 0;  // fresh draws over the same users' coupling maps
};

using CouplingMap = std::array<std::array<int, 3>, 24>;

inline CouplingMap user_coupling(std::uint64_t seed, std::size_t user) {
  std::mt19937_64 rng(derive_seed(seed, user, 0xC0u));
  std::uniform_int_distribution<int> mob(0, kMobilityTuples - 1);
  CouplingMap m{};
  for (auto& h : m)
    for (auto& v : h) v = mob(rng);
  return m;
}

/// Chance that a guess drawn from the mobility marginal equals an
/// independent draw from the same marginal.
inline double marginal_guess_baseline(const std::array<double, kMobilityTuples>& q) {
  double s = 0.0;
  for (double p : q) s += p * p;
  return s;
}

inline std::vector<std::vector<RefinedBehavior>> generate_behaviors(const BehaviorCorpusSpec& spec) {
  if (spec.n_users == 0 || spec.length < 2) throw InputError("behavior corpus: need users and length >= 2");
  if (spec.coupling < 0.0 || spec.coupling > 1.0) throw InputError("behavior corpus: coupling must lie in [0, 1]");
  std::vector<std::vector<RefinedBehavior>> out(spec.n_users);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const CouplingMap map = spec.per_user_coupling ? user_coupling(spec.seed, u) : CouplingMap{};
    std::mt19937_64 rng(derive_seed(spec.seed, u, 1 + spec.week));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::discrete_distribution<int> trc_draw(spec.traffic_marginal.begin(), spec.traffic_marginal.end());
    std::discrete_distribution<int> mob_draw(spec.mobility_marginal.begin(), spec.mobility_marginal.end());
    auto& seq = out[u];
    seq.resize(spec.length);
    for (std::size_t i = 0; i < spec.length; ++i) {
      auto& b = seq[i];
      b.slot = static_cast<int>(i % kSlotsPerWeek);
      const int hour = (b.slot % kSlotsPerDay) / 2;
      b.trc = static_cast<Traffic>(trc_draw(rng));
      const int coupled = spec.per_user_coupling ? map[static_cast<std::size_t>(hour)][static_cast<std::size_t>(b.trc)]
                                                 : shared_coupling(hour, b.trc);
      const int mob = unit(rng) < spec.coupling ? coupled : mob_draw(rng);
      b.disc = static_cast<Distance>(mob / 4);
      b.rep = (mob & 2) != 0;
      b.sta = (mob & 1) != 0;
    }
  }
  return out;
}

}  // namespace xdrmob
