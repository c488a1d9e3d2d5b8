#pragma once

// Compressible isotropic hyperelastic laws evaluated under plane-strain
// kinematics. All laws are written as functions of the invariants of the
// lifted tensor diag(C, 1); stresses and tangents follow from the chain rule
// in invariant_stress() / invariant_tangent().

#include <cmath>
#include <concepts>
#include <string>
#include <string_view>
#include <variant>

#include "ddlab/tensor.hpp"

namespace ddlab {

/// Value, gradient and Hessian of an energy with respect to (I1, I2, I3).
struct InvariantDerivatives {
  double psi = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

namespace detail {

// Mandel vectors of dI_k/dC.
inline void invariant_gradients(const SymTensor2& C, const Invariants& inv, Vec3& g1, Vec3& g2,
                                Vec3& g3) {
  g1 = Vec3(1.0, 1.0, 0.0);
  g2 = inv.i1 * g1 - C.mandel();
  g3 = inv.i3 * C.inverse().mandel();
}

}  // namespace detail

/// S = 2 sum_k psi_k dI_k/dC, in-plane part.
inline SymTensor2 invariant_stress(const SymTensor2& C, const Invariants& inv, const Vec3& dpsi) {
  Vec3 g1, g2, g3;
  detail::invariant_gradients(C, inv, g1, g2, g3);
  return SymTensor2::from_mandel(2.0 * (dpsi[0] * g1 + dpsi[1] * g2 + dpsi[2] * g3));
}

/// D = 2 dS/dC = 4 d^2 psi / dC dC in Mandel form.
inline Mat3 invariant_tangent(const SymTensor2& C, const Invariants& inv, const Vec3& dpsi,
                              const Mat3& d2psi) {
  Vec3 g1, g2, g3;
  detail::invariant_gradients(C, inv, g1, g2, g3);
  Eigen::Matrix3d g;
  g.col(0) = g1;
  g.col(1) = g2;
  g.col(2) = g3;
  const SymTensor2 cinv = C.inverse();
  const Vec3 ci = cinv.mandel();
  Mat3 d = g * d2psi * g.transpose();
  d += dpsi[1] * (g1 * g1.transpose() - Mat3::Identity());
  d += dpsi[2] * inv.i3 * (ci * ci.transpose() - mandel_sandwich(cinv));
  return 4.0 * d;
}

// ---------------------------------------------------------------------------
// Ciarlet

struct CiarletParams {
  double mu = 185.185;
  double lambda = 432.099;
};

inline void require_invertible(const SymTensor2& C) {
  if (!(C.a11 > 0.0 && C.det() > 0.0)) throw NonInvertibleDeformation();
}

inline double ciarlet_energy(const SymTensor2& C, const CiarletParams& p) {
  require_invertible(C);
  const double i1 = C.trace() + 1.0;
  const double j2 = C.det();
  return 0.5 * p.mu * (i1 - 3.0) + 0.25 * p.lambda * (j2 - 1.0) -
         (0.5 * p.lambda + p.mu) * 0.5 * std::log(j2);
}

inline SymTensor2 ciarlet_stress(const SymTensor2& C, const CiarletParams& p) {
  require_invertible(C);
  const double j2 = C.det();
  const SymTensor2 cinv = C.inverse();
  return 0.5 * p.lambda * (j2 - 1.0) * cinv + p.mu * (SymTensor2::identity() - cinv);
}

inline InvariantDerivatives ciarlet_invariant_derivatives(const Invariants& inv,
                                                          const CiarletParams& p) {
  InvariantDerivatives d;
  const double k = 0.5 * (0.5 * p.lambda + p.mu);
  d.psi = 0.5 * p.mu * (inv.i1 - 3.0) + 0.25 * p.lambda * (inv.i3 - 1.0) - k * std::log(inv.i3);
  d.grad = Vec3(0.5 * p.mu, 0.0, 0.25 * p.lambda - k / inv.i3);
  d.hess(2, 2) = k / (inv.i3 * inv.i3);
  return d;
}

inline Mat3 ciarlet_tangent(const SymTensor2& C, const CiarletParams& p) {
  require_invertible(C);
  const Invariants inv = invariants_plane_strain(C);
  const InvariantDerivatives d = ciarlet_invariant_derivatives(inv, p);
  return invariant_tangent(C, inv, d.grad, d.hess);
}

// ---------------------------------------------------------------------------
// Hartmann-Neff

struct HartmannNeffParams {
  double a = 3.67e-3;
  double c10 = 0.1788;
  double c01 = 0.1958;
  double k = 80.0;
};

inline InvariantDerivatives hn_invariant_derivatives(const Invariants& inv,
                                                     const HartmannNeffParams& p) {
  const double i3 = inv.i3;
  const double t13 = std::pow(i3, -1.0 / 3.0);
  const double t23 = t13 * t13;
  const double b1 = inv.i1 * t13;  // isochoric I1
  const double b2 = inv.i2 * t23;  // isochoric I2

  // Derivatives of the isochoric invariants with respect to (I1, I2, I3).
  const Vec3 db1(t13, 0.0, -inv.i1 * t13 / (3.0 * i3));
  const Vec3 db2(0.0, t23, -2.0 * inv.i2 * t23 / (3.0 * i3));
  Mat3 d2b1 = Mat3::Zero();
  d2b1(0, 2) = d2b1(2, 0) = -t13 / (3.0 * i3);
  d2b1(2, 2) = 4.0 * inv.i1 * t13 / (9.0 * i3 * i3);
  Mat3 d2b2 = Mat3::Zero();
  d2b2(1, 2) = d2b2(2, 1) = -2.0 * t23 / (3.0 * i3);
  d2b2(2, 2) = 10.0 * inv.i2 * t23 / (9.0 * i3 * i3);

  const double sb2 = std::sqrt(b2);
  const double w = p.a * (b1 * b1 * b1 - 27.0) + p.c10 * (b1 - 3.0) +
                   p.c01 * (b2 * sb2 - 3.0 * std::sqrt(3.0));
  const double w1 = 3.0 * p.a * b1 * b1 + p.c10;
  const double w11 = 6.0 * p.a * b1;
  const double w2 = 1.5 * p.c01 * sb2;
  const double w22 = 0.75 * p.c01 / sb2;

  // U(J) = k/50 (J^5 + J^-5 - 2) written in I3 = J^2.
  const double kk = p.k / 50.0;
  const double j5 = std::pow(i3, 2.5);
  const double u = kk * (j5 + 1.0 / j5 - 2.0);
  const double du = kk * 2.5 * (j5 - 1.0 / j5) / i3;
  const double d2u = kk * (3.75 * j5 + 8.75 / j5) / (i3 * i3);

  InvariantDerivatives d;
  d.psi = w + u;
  d.grad = w1 * db1 + w2 * db2;
  d.grad[2] += du;
  d.hess = w11 * db1 * db1.transpose() + w22 * db2 * db2.transpose() + w1 * d2b1 + w2 * d2b2;
  d.hess(2, 2) += d2u;
  return d;
}

inline double hn_energy(const SymTensor2& C, const HartmannNeffParams& p) {
  require_invertible(C);
  return hn_invariant_derivatives(invariants_plane_strain(C), p).psi;
}

/// Closed-form isochoric/volumetric split with C_bar = J^{-2/3} C.
inline SymTensor2 hn_stress(const SymTensor2& C, const HartmannNeffParams& p) {
  require_invertible(C);
  const Invariants inv = invariants_plane_strain(C);
  const double j = std::sqrt(inv.i3);
  const double t23 = std::pow(j, -2.0 / 3.0);
  const double b1 = inv.i1 * t23;
  const double b2 = inv.i2 * t23 * t23;
  const double w1 = 3.0 * p.a * b1 * b1 + p.c10;
  const double w2 = 1.5 * p.c01 * std::sqrt(b2);
  const double du = p.k / 50.0 * 5.0 * (std::pow(j, 4) - std::pow(j, -6));
  const SymTensor2 cinv = C.inverse();
  const SymTensor2 cbar = t23 * C;
  const SymTensor2 cbar_inv = (1.0 / t23) * cinv;
  // Grouped per W-derivative so that each bracket vanishes exactly at C = I.
  const SymTensor2 iso = w1 * (SymTensor2::identity() - (b1 / 3.0) * cbar_inv) +
                         w2 * (b1 * SymTensor2::identity() - cbar - (2.0 * b2 / 3.0) * cbar_inv);
  return j * du * cinv + 2.0 * t23 * iso;
}

inline Mat3 hn_tangent(const SymTensor2& C, const HartmannNeffParams& p) {
  require_invertible(C);
  const Invariants inv = invariants_plane_strain(C);
  const InvariantDerivatives d = hn_invariant_derivatives(inv, p);
  return invariant_tangent(C, inv, d.grad, d.hess);
}

// ---------------------------------------------------------------------------
// Model objects consumed by the finite element solver.

template <class M>
concept HyperelasticModel = requires(const M& m, const SymTensor2& C) {
  { m.energy(C) } -> std::convertible_to<double>;
  { m.stress(C) } -> std::same_as<SymTensor2>;
  { m.tangent(C) } -> std::same_as<Mat3>;
};

struct Ciarlet {
  CiarletParams params;
  double energy(const SymTensor2& C) const { return ciarlet_energy(C, params); }
  SymTensor2 stress(const SymTensor2& C) const { return ciarlet_stress(C, params); }
  Mat3 tangent(const SymTensor2& C) const { return ciarlet_tangent(C, params); }
};

struct HartmannNeff {
  HartmannNeffParams params;
  double energy(const SymTensor2& C) const { return hn_energy(C, params); }
  SymTensor2 stress(const SymTensor2& C) const { return hn_stress(C, params); }
  Mat3 tangent(const SymTensor2& C) const { return hn_tangent(C, params); }
};

enum class LawKind { Ciarlet, HartmannNeff };

/// Runtime-selected analytic law.
class AnalyticLaw {
 public:
  AnalyticLaw() = default;
  AnalyticLaw(Ciarlet c) : law_(c) {}
  AnalyticLaw(HartmannNeff h) : law_(h) {}

  LawKind kind() const { return law_.index() == 0 ? LawKind::Ciarlet : LawKind::HartmannNeff; }
  std::string name() const { return kind() == LawKind::Ciarlet ? "ciarlet" : "hn"; }

  double energy(const SymTensor2& C) const {
    return std::visit([&](const auto& l) { return l.energy(C); }, law_);
  }
  SymTensor2 stress(const SymTensor2& C) const {
    return std::visit([&](const auto& l) { return l.stress(C); }, law_);
  }
  Mat3 tangent(const SymTensor2& C) const {
    return std::visit([&](const auto& l) { return l.tangent(C); }, law_);
  }

  const std::variant<Ciarlet, HartmannNeff>& variant() const { return law_; }

 private:
  std::variant<Ciarlet, HartmannNeff> law_;
};

inline AnalyticLaw law_from_name(std::string_view name) {
  if (name == "ciarlet") return Ciarlet{};
  if (name == "hn" || name == "hartmann-neff") return HartmannNeff{};
  throw InvalidConfig("unknown law '" + std::string(name) + "'");
}

/// D = 2 dS/dC of an analytic law in Mandel form.
inline Mat3 analytic_tangent(const SymTensor2& C, const AnalyticLaw& law) { return law.tangent(C); }

static_assert(HyperelasticModel<Ciarlet>);
static_assert(HyperelasticModel<HartmannNeff>);
static_assert(HyperelasticModel<AnalyticLaw>);

}  // namespace ddlab
