#pragma once

// Deliberately naive reference implementations used as test oracles. They
// share no code with the library beyond the input types: distances use the
// atan2 great-circle form instead of haversine, match lengths are found by
// brute-force substring search, population counts by rescanning every user.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "xdrmob/ingest.hpp"

namespace naive {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRadius = 6371.0088;

struct Vec3 {
  double x, y, z;
};

inline Vec3 unit(double lat_deg, double lon_deg) {
  const double la = lat_deg * kPi / 180.0, lo = lon_deg * kPi / 180.0;
  return {std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
}

/// Central angle from the cross and dot products of the two unit vectors.
inline double distance_km(Vec3 a, Vec3 b) {
  const double cx = a.y * b.z - a.z * b.y, cy = a.z * b.x - a.x * b.z, cz = a.x * b.y - a.y * b.x;
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double dot = a.x * b.x + a.y * b.y + a.z * b.z;
  return kRadius * std::atan2(cross, dot);
}

inline double distance_km(double lat1, double lon1, double lat2, double lon2) {
  return distance_km(unit(lat1, lon1), unit(lat2, lon2));
}

inline double gyration(const std::vector<Vec3>& pts, const std::vector<double>& w) {
  if (pts.size() < 2) return 0.0;
  Vec3 c{0, 0, 0};
  double total = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    c.x += w[i] * pts[i].x;
    c.y += w[i] * pts[i].y;
    c.z += w[i] * pts[i].z;
    total += w[i];
  }
  const double norm = std::sqrt(c.x * c.x + c.y * c.y + c.z * c.z);
  c = {c.x / norm, c.y / norm, c.z / norm};
  double ss = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = distance_km(pts[i], c);
    ss += w[i] * d * d;
  }
  return std::sqrt(ss / total);
}

/// Brute force: grow k until s[i, i+k) is absent from s[0, i).
template <class T>
std::vector<std::size_t> match_lengths(const std::vector<T>& s) {
  const std::size_t n = s.size();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 1;
    for (;; ++k) {
      if (i + k > n) break;  // ran off the end: report length + 1
      bool found = false;
      for (std::size_t j = 0; j + k <= i && !found; ++j) found = std::equal(s.begin() + j, s.begin() + j + k, s.begin() + i);
      if (!found) break;
    }
    out[i] = k;
  }
  return out;
}

template <class T>
double entropy(const std::vector<T>& s) {
  if (s.size() < 2) return 0.0;
  double sum = 0;
  for (auto l : match_lengths(s)) sum += static_cast<double>(l);
  const double n = static_cast<double>(s.size());
  return n * std::log2(n) / sum;
}

/// Fano inversion by a long fixed-count bisection on the function written
/// out independently.
inline double predictability(double h, std::size_t symbols) {
  if (symbols == 1) return 1.0;
  const double n = static_cast<double>(symbols);
  auto fano = [&](double p) {
    const double hb = (p <= 0 || p >= 1) ? 0.0 : -(p * std::log2(p) + (1 - p) * std::log2(1 - p));
    return hb + (1 - p) * std::log2(n - 1);
  };
  double a = 1.0 / n, b = 1.0;
  if (h >= fano(a)) return a;
  if (h <= 0) return 1.0;
  for (int it = 0; it < 200; ++it) {
    const double m = (a + b) / 2;
    (fano(m) > h ? a : b) = m;
  }
  return (a + b) / 2;
}

struct Features {
  double events_per_day = 0, session_volume = 0, step_km = 0, rg_unique = 0, rg_event = 0;
  double repetitiveness = 0, stationarity = 0, diversity = 0, predictability = 0;
  double succ_ret = 0, succ_expl = 0, popularity = 0, flow = 0;

  std::vector<double> values() const {
    return {events_per_day, session_volume, step_km, rg_unique, rg_event, repetitiveness, stationarity,
            diversity,      predictability, succ_ret, succ_expl, popularity, flow};
  }
};

struct Point {
  int slot;
  std::string cell;
};

inline std::vector<Point> located(const xdrmob::UserSequence& u) {
  std::vector<Point> p;
  for (const auto& e : u.events)
    if (e.volume > 0) p.push_back({e.slot, e.cell});
  return p;
}

/// All 13 features of users[index], with population counts obtained by
/// scanning every user of the province.
inline Features features(const std::vector<xdrmob::UserSequence>& users, std::size_t index,
                         const xdrmob::CellCatalog& catalog, std::size_t min_predictability = 10) {
  const auto& u = users[index];
  Features f;
  double vol = 0;
  int active = 0;
  for (const auto& e : u.events)
    if (e.volume > 0) {
      ++active;
      vol += static_cast<double>(e.volume);
    }
  if (active > 0) {
    f.events_per_day = active / 7.0;
    f.session_volume = vol / active;
  }

  const auto pts = located(u);
  const std::size_t n = pts.size();
  auto where = [&](const std::string& code) {
    const auto& info = catalog.info(*catalog.find(code));
    return unit(info.lat, info.lon);
  };
  if (n >= 2) {
    double d = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) d += distance_km(where(pts[i].cell), where(pts[i + 1].cell));
    f.step_km = d / static_cast<double>(n - 1);
    std::map<std::string, double> visits;
    for (const auto& p : pts) visits[p.cell] += 1;
    std::vector<Vec3> v;
    std::vector<double> ones, counts;
    for (const auto& [c, m] : visits) {
      v.push_back(where(c));
      ones.push_back(1.0);
      counts.push_back(m);
    }
    f.rg_unique = gyration(v, ones);
    f.rg_event = gyration(v, counts);
  }

  std::vector<std::string> seq;
  for (const auto& p : pts) seq.push_back(p.cell);
  std::set<std::string> distinct(seq.begin(), seq.end());
  if (n > 0) f.repetitiveness = 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(n);
  if (n >= 2) {
    int same = 0;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      same += seq[i] == seq[i + 1];
      std::pair<std::string, std::string> p{seq[i], seq[i + 1]};
      if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
    }
    f.stationarity = static_cast<double>(same) / static_cast<double>(n - 1);
    f.diversity = static_cast<double>(pairs.size()) / static_cast<double>(n - 1);

    std::vector<int> label(n, -1);  // 1 return, 0 exploration, from the second event
    for (std::size_t i = 1; i < n; ++i)
      label[i] = std::find(seq.begin(), seq.begin() + static_cast<long>(i), seq[i]) != seq.begin() + static_cast<long>(i);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      f.succ_ret += label[i] == 1 && label[i + 1] == 1;
      f.succ_expl += label[i] == 0 && label[i + 1] == 0;
    }
  }
  if (distinct.size() == 1) {
    f.predictability = 1.0;
  } else if (n >= min_predictability) {
    f.predictability = predictability(entropy(seq), distinct.size());
  }

  // Population counts by rescanning everyone.
  if (n > 0) {
    double p = 0;
    for (const auto& pt : pts) {
      int users_here = 0;
      for (const auto& other : users)
        for (const auto& q : located(other))
          if (q.slot == pt.slot && q.cell == pt.cell) {
            ++users_here;
            break;
          }
      p += users_here;
    }
    f.popularity = p / static_cast<double>(n);
  }
  if (n >= 2) {
    double fl = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      int users_path = 0;
      for (const auto& other : users) {
        const auto q = located(other);
        for (std::size_t k = 0; k + 1 < q.size(); ++k)
          if (q[k].slot == pts[i].slot && q[k].cell == pts[i].cell && q[k + 1].cell == pts[i + 1].cell) {
            ++users_path;
            break;
          }
      }
      fl += users_path;
    }
    f.flow = fl / static_cast<double>(n - 1);
  }
  return f;
}

inline double relative_error(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

}  // namespace naive
