#pragma once

// Test-only reference computations: finite differences and random states.
// Nothing here calls the analytic derivative code it is used to check.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

#include "ddlab/tensor.hpp"

namespace ddlab::oracle {

/// Five-point central difference of f at 0.
inline double diff5(const std::function<double(double)>& f, double h) {
  return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

/// 2 dPsi/dC by finite differences, in engineering components.
inline SymTensor2 fd_stress(const std::function<double(const SymTensor2&)>& psi, const SymTensor2& C,
                            double h = 1e-4) {
  SymTensor2 s;
  s.a11 = 2.0 * diff5([&](double t) { return psi({C.a11 + t, C.a22, C.a12}); }, h);
  s.a22 = 2.0 * diff5([&](double t) { return psi({C.a11, C.a22 + t, C.a12}); }, h);
  // A symmetric perturbation of C12 and C21 moves psi by 2 (dPsi/dC)_12 t.
  s.a12 = diff5([&](double t) { return psi({C.a11, C.a22, C.a12 + t}); }, h);
  return s;
}

/// dS/dE (= 2 dS/dC) in Mandel form by finite differences of a stress function.
inline Mat3 fd_tangent(const std::function<SymTensor2(const SymTensor2&)>& stress, const SymTensor2& C,
                       double h = 1e-4) {
  Mat3 d;
  const Vec3 e0 = strain_from_cauchy_green(C).mandel();
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i) {
      d(i, k) = diff5(
          [&](double t) {
            Vec3 e = e0;
            e[k] += t;
            return stress(cauchy_green_from_strain(SymTensor2::from_mandel(e))).mandel()[i];
          },
          h);
    }
  }
  return d;
}

/// Random SPD tensor with eigenvalues in [lo, hi] and random orientation.
inline SymTensor2 random_spd(std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> eig(lo, hi);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  Eigen::Matrix2d d = Eigen::Vector2d(eig(rng), eig(rng)).asDiagonal();
  const Tensor2 q = rotation(ang(rng));
  return SymTensor2::from_matrix(q * d * q.transpose());
}

inline SymTensor2 random_sym(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng)};
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref) {
  const double n = ref.norm();
  return (a - ref).norm() / (n > 0.0 ? n : 1.0);
}

inline double rel_err(const SymTensor2& a, const SymTensor2& ref) {
  return rel_err(Eigen::MatrixXd(a.mandel()), Eigen::MatrixXd(ref.mandel()));
}

}  // namespace ddlab::oracle
