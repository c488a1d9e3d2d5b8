#pragma once

// Phase-space metric: ||(E, S)||^2 = E.C E + S.C^{-1} S with Mandel vectors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>

#include "ddlab/errors.hpp"
#include "ddlab/tensor.hpp"

namespace ddlab {

using Vec6 = Eigen::Matrix<double, 6, 1>;

/// SPD metric together with its Cholesky factor C = L L^T.
class MetricTensor {
 public:
  MetricTensor() : MetricTensor(Mat3::Identity()) {}
  explicit MetricTensor(const Mat3& c) : c_(0.5 * (c + c.transpose())) {
    Eigen::LLT<Mat3> llt(c_);
    if (llt.info() != Eigen::Success) throw NonPositiveDefinite("metric tensor is not positive definite");
    l_ = llt.matrixL();
    l_inv_ = l_.inverse();
    c_inv_ = l_inv_.transpose() * l_inv_;
  }

  const Mat3& matrix() const { return c_; }
  const Mat3& inverse() const { return c_inv_; }

  /// Coordinates in which the local norm is Euclidean: (L^T E, L^{-1} S).
  Vec6 map(const PhasePoint& z) const {
    Vec6 x;
    x.head<3>() = l_.transpose() * z.E.mandel();
    x.tail<3>() = l_inv_ * z.S.mandel();
    return x;
  }

  PhasePoint unmap(const Vec6& x) const {
    return {SymTensor2::from_mandel(l_.transpose().triangularView<Eigen::Upper>().solve(Vec3(x.head<3>()))),
            SymTensor2::from_mandel(l_ * x.tail<3>())};
  }

 private:
  Mat3 c_, c_inv_, l_, l_inv_;
};

inline double local_norm_squared(const PhasePoint& z, const MetricTensor& m) {
  const Vec3 e = z.E.mandel(), s = z.S.mandel();
  return e.dot(m.matrix() * e) + s.dot(m.inverse() * s);
}

inline double local_norm(const PhasePoint& z, const MetricTensor& m) { return std::sqrt(local_norm_squared(z, m)); }

inline PhasePoint operator-(const PhasePoint& a, const PhasePoint& b) { return {a.E - b.E, a.S - b.S}; }

/// Least-squares linear fit S ~ M E over the data, symmetrised and clipped to SPD.
inline MetricTensor estimate_metric(std::span<const PhasePoint> data) {
  if (data.size() < 3) throw DegenerateDatabase("metric estimation needs at least three points");
  Eigen::MatrixXd e(static_cast<Eigen::Index>(data.size()), 3), s(static_cast<Eigen::Index>(data.size()), 3);
  for (std::size_t i = 0; i < data.size(); ++i) {
    e.row(static_cast<Eigen::Index>(i)) = data[i].E.mandel().transpose();
    s.row(static_cast<Eigen::Index>(i)) = data[i].S.mandel().transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sigma = svd.singularValues();
  if (!(sigma[0] > 0.0)) throw DegenerateDatabase("all strains are zero");
  // Identical strains span a single direction and leave no usable fit.
  Eigen::Vector3d mean = e.colwise().mean().transpose();
  if ((e.rowwise() - mean.transpose()).norm() == 0.0) throw DegenerateDatabase("all strains are identical");
  svd.setThreshold(1e-10);
  const Mat3 mt = svd.solve(s);  // E M^T = S
  Mat3 m = 0.5 * (mt + mt.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
  Vec3 lam = eig.eigenvalues();
  const double floor = 1e-6 * std::max(lam.maxCoeff(), 1.0);
  lam = lam.cwiseMax(floor);
  return MetricTensor(eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose());
}

}  // namespace ddlab
