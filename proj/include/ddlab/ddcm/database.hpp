#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ddlab/errors.hpp"
#include "ddlab/tensor.hpp"

namespace ddlab {

struct MaterialDatabase {
  std::vector<PhasePoint> points;
  std::string source;
  double noise = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
};

/// Orbit angles -pi/2 + j pi / n, j = 0..n-1.
inline std::vector<double> orbit_angles(int n_orbits) {
  if (n_orbits < 1) throw InvalidConfig("n_orbits must be >= 1");
  std::vector<double> a(static_cast<std::size_t>(n_orbits));
  for (int j = 0; j < n_orbits; ++j) a[static_cast<std::size_t>(j)] = -M_PI / 2 + j * M_PI / n_orbits;
  return a;
}

/// Every point rotated by every orbit angle; point-major ordering.
inline MaterialDatabase enrich_isotropic(const MaterialDatabase& db, int n_orbits) {
  const std::vector<double> angles = orbit_angles(n_orbits);
  std::vector<Tensor2> rot;
  for (double a : angles) rot.push_back(rotation(a));
  MaterialDatabase out = db;
  out.points.clear();
  out.points.reserve(db.size() * angles.size());
  for (const PhasePoint& p : db.points)
    for (const Tensor2& q : rot) out.points.push_back({rotate(p.E, q), rotate(p.S, q)});
  return out;
}

}  // namespace ddlab
