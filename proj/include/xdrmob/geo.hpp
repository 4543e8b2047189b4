#pragma once

#include <cmath>
#include <numbers>
#include <span>

namespace xdrmob {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct LatLon {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Great-circle distance on the mean-radius sphere.
inline double haversine_km(LatLon a, LatLon b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.lon - a.lon);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  if (h > 1.0) h = 1.0;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

struct UnitVector {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline UnitVector to_unit(LatLon p) {
  const double phi = deg2rad(p.lat);
  const double lambda = deg2rad(p.lon);
  return {std::cos(phi) * std::cos(lambda), std::cos(phi) * std::sin(lambda), std::sin(phi)};
}

inline LatLon from_unit(UnitVector v) {
  const double hyp = std::hypot(v.x, v.y);
  return {rad2deg(std::atan2(v.z, hyp)), rad2deg(std::atan2(v.y, v.x))};
}

/// Weighted centroid on the sphere: mean of unit vectors, projected back onto
/// the surface. Falls back to the first point when the mean vanishes
/// (antipodal mass).
inline LatLon spherical_centroid(std::span<const LatLon> points, std::span<const double> weights) {
  UnitVector acc;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto u = to_unit(points[i]);
    const double w = weights.empty() ? 1.0 : weights[i];
    acc.x += w * u.x;
    acc.y += w * u.y;
    acc.z += w * u.z;
  }
  const double norm = std::sqrt(acc.x * acc.x + acc.y * acc.y + acc.z * acc.z);
  if (norm < 1e-12) return points.empty() ? LatLon{} : points.front();
  return from_unit({acc.x / norm, acc.y / norm, acc.z / norm});
}

/// Root-mean-square great-circle distance to the (weighted) spherical centroid.
inline double radius_of_gyration_km(std::span<const LatLon> points, std::span<const double> weights = {}) {
  if (points.size() < 2) return 0.0;
  const LatLon c = spherical_centroid(points, weights);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const double d = haversine_km(points[i], c);
    num += w * d * d;
    den += w;
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace xdrmob
