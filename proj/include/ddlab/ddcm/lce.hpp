#pragma once

// Locally convex embedding: the closest point of the convex hull of the k
// nearest neighbours, with the unit-sum constraint imposed by a penalty.

#include <vector>

#include "ddlab/ddcm/nnls.hpp"
#include "ddlab/ddcm/search.hpp"

namespace ddlab {

struct LceResult {
  PhasePoint z;
  std::vector<Neighbor> neighbors;
  Eigen::VectorXd weights;
  double rho = 0.0;
};

/// rho = rho_factor * mean squared mapped norm of the neighbours.
inline LceResult lce_project(const PhasePoint& z, const SearchIndex& ix, std::size_t k, double rho_factor = 0.1) {
  LceResult r;
  r.neighbors = ix.knn(z, k);
  const Eigen::Index n = static_cast<Eigen::Index>(r.neighbors.size());
  Eigen::MatrixXd a(7, n);
  double mean_sq = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec6& x = ix.mapped(r.neighbors[static_cast<std::size_t>(j)].index);
    a.col(j).head<6>() = x;
    mean_sq += x.squaredNorm();
  }
  mean_sq /= static_cast<double>(n);
  // A neighbourhood at the origin still needs a positive penalty scale.
  r.rho = rho_factor * (mean_sq > 0.0 ? mean_sq : 1.0);
  const double sr = std::sqrt(r.rho);
  a.row(6).setConstant(sr);
  Eigen::VectorXd b(7);
  b.head<6>() = ix.metric().map(z);
  b[6] = sr;
  r.weights = nnls(a, b);
  PhasePoint out{};
  for (Eigen::Index j = 0; j < n; ++j) {
    const PhasePoint& p = ix.point(r.neighbors[static_cast<std::size_t>(j)].index);
    out.E = out.E + r.weights[j] * p.E;
    out.S = out.S + r.weights[j] * p.S;
  }
  r.z = out;
  return r;
}

}  // namespace ddlab
