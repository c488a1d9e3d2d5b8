#pragma once

// Plane-strain tensor algebra. Symmetric 2x2 tensors are stored by their
// engineering components (a11, a22, a12); the Mandel vector
// (a11, a22, sqrt(2) a12) is used whenever a metric or a linear map acts on
// them, so that Euclidean dot products equal double contractions.

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "ddlab/errors.hpp"

namespace ddlab {

inline constexpr double kSqrt2 = 1.41421356237309504880;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Full 2x2 tensor (deformation or displacement gradient).
using Tensor2 = Eigen::Matrix2d;

struct SymTensor2 {
  double a11 = 0.0;
  double a22 = 0.0;
  double a12 = 0.0;

  static SymTensor2 identity() { return {1.0, 1.0, 0.0}; }

  static SymTensor2 from_matrix(const Tensor2& m) {
    return {m(0, 0), m(1, 1), 0.5 * (m(0, 1) + m(1, 0))};
  }
  static SymTensor2 from_mandel(const Vec3& v) { return {v[0], v[1], v[2] / kSqrt2}; }

  Tensor2 matrix() const {
    Tensor2 m;
    m << a11, a12, a12, a22;
    return m;
  }
  Vec3 mandel() const { return {a11, a22, kSqrt2 * a12}; }

  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a12; }
  /// Frobenius norm.
  double norm() const { return std::sqrt(a11 * a11 + a22 * a22 + 2.0 * a12 * a12); }

  bool is_spd() const { return a11 > 0.0 && det() > 0.0; }

  SymTensor2 inverse() const {
    const double d = det();
    return {a22 / d, a11 / d, -a12 / d};
  }

  /// Eigenvalues in ascending order.
  std::pair<double, double> eigenvalues() const {
    const double m = 0.5 * (a11 + a22);
    const double r = std::hypot(0.5 * (a11 - a22), a12);
    return {m - r, m + r};
  }

  SymTensor2& operator+=(const SymTensor2& o) {
    a11 += o.a11;
    a22 += o.a22;
    a12 += o.a12;
    return *this;
  }
  SymTensor2& operator-=(const SymTensor2& o) {
    a11 -= o.a11;
    a22 -= o.a22;
    a12 -= o.a12;
    return *this;
  }
  SymTensor2& operator*=(double s) {
    a11 *= s;
    a22 *= s;
    a12 *= s;
    return *this;
  }
  friend SymTensor2 operator+(SymTensor2 a, const SymTensor2& b) { return a += b; }
  friend SymTensor2 operator-(SymTensor2 a, const SymTensor2& b) { return a -= b; }
  friend SymTensor2 operator*(double s, SymTensor2 a) { return a *= s; }
  friend SymTensor2 operator*(SymTensor2 a, double s) { return a *= s; }
  friend bool operator==(const SymTensor2&, const SymTensor2&) = default;
};

/// Double contraction a : b.
inline double contract(const SymTensor2& a, const SymTensor2& b) {
  return a.a11 * b.a11 + a.a22 * b.a22 + 2.0 * a.a12 * b.a12;
}

/// Strain-stress pair at one control point.
struct PhasePoint {
  SymTensor2 E;
  SymTensor2 S;
  friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

/// Principal invariants of the plane-strain lift diag(C, 1).
struct Invariants {
  double i1 = 3.0;
  double i2 = 3.0;
  double i3 = 1.0;

  Vec3 shifted() const { return {i1 - 3.0, i2 - 3.0, i3 - 1.0}; }
};

/// E = 1/2 (grad_u + grad_u^T + grad_u^T grad_u).
inline SymTensor2 green_lagrange(const Tensor2& grad_u) {
  const Tensor2 e = 0.5 * (grad_u + grad_u.transpose() + grad_u.transpose() * grad_u);
  return {e(0, 0), e(1, 1), e(0, 1)};
}

inline SymTensor2 right_cauchy_green(const Tensor2& F) {
  if (!(F.determinant() > 0.0)) throw NonInvertibleDeformation();
  const Tensor2 c = F.transpose() * F;
  return {c(0, 0), c(1, 1), c(0, 1)};
}

inline SymTensor2 cauchy_green_from_strain(const SymTensor2& E) {
  return {1.0 + 2.0 * E.a11, 1.0 + 2.0 * E.a22, 2.0 * E.a12};
}

inline SymTensor2 strain_from_cauchy_green(const SymTensor2& C) {
  return {0.5 * (C.a11 - 1.0), 0.5 * (C.a22 - 1.0), 0.5 * C.a12};
}

inline Invariants invariants_plane_strain(const SymTensor2& C) {
  if (!C.is_spd()) throw NonPositiveDefinite("right Cauchy-Green tensor is not SPD");
  const double tr = C.trace();
  const double det = C.det();
  // tr C3 = tr C + 1, tr C3^2 = tr C^2 + 1  =>  I2 = det C + tr C.
  return {tr + 1.0, det + tr, det};
}

inline Vec3 shifted_invariants(const SymTensor2& C) { return invariants_plane_strain(C).shifted(); }

/// Counterclockwise rotation by theta.
inline Tensor2 rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Tensor2 q;
  q << c, -s, s, c;
  return q;
}

/// Q^T A Q.
inline SymTensor2 rotate(const SymTensor2& a, const Tensor2& q) {
  return SymTensor2::from_matrix(q.transpose() * a.matrix() * q);
}

inline PhasePoint rotate_pair(const PhasePoint& p, double theta) {
  const Tensor2 q = rotation(theta);
  return {rotate(p.E, q), rotate(p.S, q)};
}

/// Mandel matrix of the linear map X -> A X A for symmetric A.
inline Mat3 mandel_sandwich(const SymTensor2& a) {
  Mat3 m;
  const SymTensor2 basis[3] = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0 / kSqrt2}};
  const Tensor2 am = a.matrix();
  for (int j = 0; j < 3; ++j) {
    m.col(j) = SymTensor2::from_matrix(am * basis[j].matrix() * am).mandel();
  }
  return m;
}

}  // namespace ddlab
