#pragma once

// Shallow invariant-based network for the strain energy:
//
//   psi(C) = sum_j w2_j (exp(alpha_j z_j) - 1),   z_j = sum_i w1_ij x_i,
//
// with x = (I1 - 3, I2 - 3, I3 - 1). There are no biases, so psi(I) = 0 for
// every parameter set. Convexity in the invariants holds whenever w2 >= 0.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "ddlab/materials.hpp"
#include "ddlab/tensor.hpp"

namespace ddlab {

struct NetworkParams {
  Eigen::Matrix<double, 3, Eigen::Dynamic> w1;
  Eigen::VectorXd alpha;
  Eigen::VectorXd w2;

  NetworkParams() = default;
  explicit NetworkParams(int n_hidden)
      : w1(Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n_hidden)),
        alpha(Eigen::VectorXd::Zero(n_hidden)),
        w2(Eigen::VectorXd::Zero(n_hidden)) {}

  int n_hidden() const { return static_cast<int>(alpha.size()); }

  void clamp_output_weights() { w2 = w2.cwiseMax(0.0); }

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.w1 == b.w1 && a.alpha == b.alpha && a.w2 == b.w2;
  }
};

/// Linear exponential unit exp(alpha x) - 1.
inline double activation(double x, double alpha) { return std::expm1(alpha * x); }

/// Energy, gradient and Hessian with respect to (I1, I2, I3).
inline InvariantDerivatives network_invariant_derivatives(const NetworkParams& p,
                                                          const Invariants& inv) {
  const Vec3 x = inv.shifted();
  InvariantDerivatives d;
  for (int j = 0; j < p.n_hidden(); ++j) {
    const auto w = p.w1.col(j);
    const double a = p.alpha[j];
    const double az = a * w.dot(x);
    const double e = std::exp(az);
    d.psi += p.w2[j] * std::expm1(az);
    d.grad += (p.w2[j] * a * e) * w;
    d.hess.noalias() += (p.w2[j] * a * a * e) * (w * w.transpose());
  }
  d.hess = 0.5 * (d.hess + d.hess.transpose()).eval();
  return d;
}

inline double forward_energy(const NetworkParams& p, const SymTensor2& C) {
  const Vec3 x = shifted_invariants(C);
  double psi = 0.0;
  for (int j = 0; j < p.n_hidden(); ++j) psi += p.w2[j] * activation(p.w1.col(j).dot(x), p.alpha[j]);
  return psi;
}

inline SymTensor2 nn_stress(const NetworkParams& p, const SymTensor2& C) {
  const Invariants inv = invariants_plane_strain(C);
  return invariant_stress(C, inv, network_invariant_derivatives(p, inv).grad);
}

inline Mat3 nn_tangent(const NetworkParams& p, const SymTensor2& C) {
  const Invariants inv = invariants_plane_strain(C);
  const InvariantDerivatives d = network_invariant_derivatives(p, inv);
  return invariant_tangent(C, inv, d.grad, d.hess);
}

/// Hessian of psi with respect to (I1, I2, I3); a sum of rank-one terms
/// w2_j alpha_j^2 exp(alpha_j z_j) w_j w_j^T.
inline Mat3 hessian_invariants(const NetworkParams& p, const Invariants& inv) {
  return network_invariant_derivatives(p, inv).hess;
}

/// Network wrapped as a constitutive model for the finite element solver.
struct NeuralLaw {
  NetworkParams params;
  double energy(const SymTensor2& C) const { return forward_energy(params, C); }
  SymTensor2 stress(const SymTensor2& C) const { return nn_stress(params, C); }
  Mat3 tangent(const SymTensor2& C) const { return nn_tangent(params, C); }
};
static_assert(HyperelasticModel<NeuralLaw>);

// ---------------------------------------------------------------------------
// Plain-text model format:
//
//   ddlab-nn v1
//   n_hidden <n>
//   w1 <n values>      (three rows, one per invariant)
//   alpha <n values>
//   w2 <n values>

inline void write_network(std::ostream& os, const NetworkParams& p) {
  os << "ddlab-nn v1\n";
  os << "n_hidden " << p.n_hidden() << "\n";
  os << std::setprecision(17);
  auto row = [&](const char* tag, auto&& values) {
    os << tag;
    for (Eigen::Index j = 0; j < values.size(); ++j) os << ' ' << values[j];
    os << '\n';
  };
  for (int i = 0; i < 3; ++i) row("w1", Eigen::VectorXd(p.w1.row(i).transpose()));
  row("alpha", p.alpha);
  row("w2", p.w2);
}

inline NetworkParams read_network(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("ddlab-nn v1", 0) != 0)
    throw MalformedFile("network file: missing 'ddlab-nn v1' header");
  std::string tag;
  int n = 0;
  if (!(is >> tag >> n) || tag != "n_hidden" || n <= 0)
    throw MalformedFile("network file: bad n_hidden line");
  NetworkParams p(n);
  auto read_row = [&](const char* expected, auto setter) {
    if (!(is >> tag) || tag != expected)
      throw MalformedFile(std::string("network file: expected row '") + expected + "'");
    for (int j = 0; j < n; ++j) {
      double v = 0.0;
      if (!(is >> v)) throw MalformedFile(std::string("network file: short row '") + expected + "'");
      setter(j, v);
    }
  };
  for (int i = 0; i < 3; ++i) read_row("w1", [&](int j, double v) { p.w1(i, j) = v; });
  read_row("alpha", [&](int j, double v) { p.alpha[j] = v; });
  read_row("w2", [&](int j, double v) { p.w2[j] = v; });
  return p;
}

inline void save_network(const std::string& path, const NetworkParams& p) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_network(os, p);
}

inline NetworkParams load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return read_network(is);
}

}  // namespace ddlab
