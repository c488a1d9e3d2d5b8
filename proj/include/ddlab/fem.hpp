#pragma once

// Total-Lagrangian plane-strain finite elements on linear triangles with
// one-point quadrature, and an incremental Newton solver.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ddlab/materials.hpp"
#include "ddlab/mesh.hpp"
#include "ddlab/tensor.hpp"

namespace ddlab {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using ShapeGradients = Eigen::Matrix<double, 3, 2>;  // row a: grad N_a
using ElementB = Eigen::Matrix<double, 3, 6>;        // Mandel strain rate per nodal dof

struct DirichletCondition {
  std::string tag;
  bool fix_x = true;
  bool fix_y = true;
  Point2 value = Point2::Zero();  // mm, scaled by the load factor
};

struct NeumannCondition {
  std::string tag;
  Point2 traction = Point2::Zero();  // N/mm per unit reference length, scaled by the load factor
};

struct BoundaryConditions {
  std::vector<DirichletCondition> dirichlet;
  std::vector<NeumannCondition> neumann;
};

/// Element geometry and the dof numbering shared by all solvers.
class Discretization {
 public:
  explicit Discretization(Mesh mesh) : mesh_(std::move(mesh)) {
    mesh_.validate();
    const std::size_t ne = mesh_.num_elements();
    area_.resize(ne);
    grad_.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      const Triangle& t = mesh_.triangles[e];
      const Point2& p0 = mesh_.nodes[static_cast<std::size_t>(t[0])];
      const Point2& p1 = mesh_.nodes[static_cast<std::size_t>(t[1])];
      const Point2& p2 = mesh_.nodes[static_cast<std::size_t>(t[2])];
      const double a2 = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
      area_[e] = 0.5 * a2;
      ShapeGradients g;
      g << p1.y() - p2.y(), p2.x() - p1.x(),  //
          p2.y() - p0.y(), p0.x() - p2.x(),   //
          p0.y() - p1.y(), p1.x() - p0.x();
      grad_[e] = g / a2;
    }
  }

  const Mesh& mesh() const { return mesh_; }
  std::size_t num_elements() const { return mesh_.num_elements(); }
  std::size_t num_dofs() const { return 2 * mesh_.num_nodes(); }
  double area(std::size_t e) const { return area_[e]; }
  const std::vector<double>& areas() const { return area_; }
  const ShapeGradients& shape_gradients(std::size_t e) const { return grad_[e]; }

  std::array<int, 6> element_dofs(std::size_t e) const {
    const Triangle& t = mesh_.triangles[e];
    return {2 * t[0], 2 * t[0] + 1, 2 * t[1], 2 * t[1] + 1, 2 * t[2], 2 * t[2] + 1};
  }

  /// (grad u)_ij = d u_i / d X_j on element e.
  Tensor2 displacement_gradient(std::size_t e, const Vector& u) const {
    const auto dofs = element_dofs(e);
    Eigen::Matrix<double, 2, 3> ue;
    for (int a = 0; a < 3; ++a) {
      ue(0, a) = u[dofs[2 * a]];
      ue(1, a) = u[dofs[2 * a + 1]];
    }
    return ue * grad_[e];
  }

  /// Rows map nodal dofs to the Mandel vector of sym(F^T grad(du)).
  ElementB strain_operator(std::size_t e, const Tensor2& F) const {
    const ShapeGradients& g = grad_[e];
    ElementB b;
    for (int a = 0; a < 3; ++a) {
      for (int i = 0; i < 2; ++i) {
        const int c = 2 * a + i;
        b(0, c) = F(i, 0) * g(a, 0);
        b(1, c) = F(i, 1) * g(a, 1);
        b(2, c) = (F(i, 0) * g(a, 1) + F(i, 1) * g(a, 0)) / kSqrt2;
      }
    }
    return b;
  }

  /// Lumped nodal areas; quadrature weights for nodal fields.
  std::vector<double> nodal_weights() const {
    std::vector<double> w(mesh_.num_nodes(), 0.0);
    for (std::size_t e = 0; e < num_elements(); ++e)
      for (int n : mesh_.triangles[e]) w[static_cast<std::size_t>(n)] += area_[e] / 3.0;
    return w;
  }

 private:
  Mesh mesh_;
  std::vector<double> area_;
  std::vector<ShapeGradients> grad_;
};

/// Constrained dofs, their reference values and the external load vector.
struct DofConstraints {
  std::vector<int> free_index;    // dof -> equation number or -1
  std::vector<int> free_dofs;
  std::vector<int> fixed_dofs;
  Vector fixed_values;  // full-size, at load factor 1
  Vector external;      // full-size, at load factor 1

  int num_free() const { return static_cast<int>(free_dofs.size()); }
};

inline DofConstraints build_constraints(const Discretization& disc, const BoundaryConditions& bcs) {
  const Mesh& mesh = disc.mesh();
  const std::size_t ndof = disc.num_dofs();
  DofConstraints c;
  c.fixed_values = Vector::Zero(static_cast<Eigen::Index>(ndof));
  c.external = Vector::Zero(static_cast<Eigen::Index>(ndof));
  std::vector<char> fixed(ndof, 0);
  for (const DirichletCondition& d : bcs.dirichlet) {
    for (const Edge& e : mesh.edges(d.tag)) {
      for (int n : e) {
        if (d.fix_x) {
          fixed[static_cast<std::size_t>(2 * n)] = 1;
          c.fixed_values[2 * n] = d.value.x();
        }
        if (d.fix_y) {
          fixed[static_cast<std::size_t>(2 * n + 1)] = 1;
          c.fixed_values[2 * n + 1] = d.value.y();
        }
      }
    }
  }
  for (const NeumannCondition& t : bcs.neumann) {
    for (const Edge& e : mesh.edges(t.tag)) {
      const double len = (mesh.nodes[static_cast<std::size_t>(e[1])] - mesh.nodes[static_cast<std::size_t>(e[0])]).norm();
      for (int n : e) {
        c.external[2 * n] += 0.5 * len * t.traction.x();
        c.external[2 * n + 1] += 0.5 * len * t.traction.y();
      }
    }
  }
  c.free_index.assign(ndof, -1);
  for (std::size_t d = 0; d < ndof; ++d) {
    if (fixed[d]) {
      c.fixed_dofs.push_back(static_cast<int>(d));
    } else {
      c.free_index[d] = static_cast<int>(c.free_dofs.size());
      c.free_dofs.push_back(static_cast<int>(d));
    }
  }
  return c;
}

struct Assembly {
  Vector internal;      // full-size internal force vector
  SparseMatrix tangent;  // full-size consistent tangent
};

/// Internal force and consistent tangent of a hyperelastic model at u.
template <HyperelasticModel Model>
Assembly assemble(const Discretization& disc, const Model& model, const Vector& u,
                  bool with_tangent = true) {
  const std::size_t ndof = disc.num_dofs();
  Assembly out;
  out.internal = Vector::Zero(static_cast<Eigen::Index>(ndof));
  std::vector<Eigen::Triplet<double>> trip;
  if (with_tangent) trip.reserve(disc.num_elements() * 36);
  for (std::size_t e = 0; e < disc.num_elements(); ++e) {
    const Tensor2 F = Tensor2::Identity() + disc.displacement_gradient(e, u);
    if (!(F.determinant() > 0.0)) throw NonInvertibleDeformation("element " + std::to_string(e) + " inverted");
    const SymTensor2 C = right_cauchy_green(F);
    const SymTensor2 S = model.stress(C);
    const ElementB B = disc.strain_operator(e, F);
    const double a = disc.area(e);
    const auto dofs = disc.element_dofs(e);
    const Eigen::Matrix<double, 6, 1> fe = a * B.transpose() * S.mandel();
    for (int i = 0; i < 6; ++i) out.internal[dofs[i]] += fe[i];
    if (!with_tangent) continue;
    const Mat3 D = model.tangent(C);
    Eigen::Matrix<double, 6, 6> ke = a * B.transpose() * D * B;
    const ShapeGradients& g = disc.shape_gradients(e);
    const Tensor2 Sm = S.matrix();
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) {
        const double geo = a * g.row(p).dot(Sm * g.row(q).transpose());
        ke(2 * p, 2 * q) += geo;
        ke(2 * p + 1, 2 * q + 1) += geo;
      }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) trip.emplace_back(dofs[i], dofs[j], ke(i, j));
  }
  if (with_tangent) {
    out.tangent.resize(static_cast<Eigen::Index>(ndof), static_cast<Eigen::Index>(ndof));
    out.tangent.setFromTriplets(trip.begin(), trip.end());
  }
  return out;
}

/// Restriction of a full-size sparse matrix to the free rows and columns.
inline SparseMatrix restrict_free(const SparseMatrix& k, const DofConstraints& c) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(k.nonZeros()));
  for (int col = 0; col < k.outerSize(); ++col) {
    const int jf = c.free_index[static_cast<std::size_t>(col)];
    if (jf < 0) continue;
    for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
      const int iff = c.free_index[static_cast<std::size_t>(it.row())];
      if (iff >= 0) trip.emplace_back(iff, jf, it.value());
    }
  }
  SparseMatrix r(c.num_free(), c.num_free());
  r.setFromTriplets(trip.begin(), trip.end());
  return r;
}

/// State at the end of one load step.
struct StepRecord {
  double load_factor = 0.0;
  Vector u;
  std::vector<SymTensor2> E;
  std::vector<SymTensor2> S;
  std::vector<double> residual_history;  // relative residual per Newton iterate
  std::vector<double> residual_norms;    // ||R_free|| in N per Newton iterate
};

struct FESolution {
  Vector u;
  std::vector<SymTensor2> E;  // per element (quadrature point)
  std::vector<SymTensor2> S;
  std::vector<StepRecord> history;  // one record per load step, without the unloaded state
  int total_iterations = 0;
};

struct NewtonOptions {
  double rel_tol = 1e-10;
  int max_iterations = 25;
};

template <HyperelasticModel Model>
void element_states(const Discretization& disc, const Model& model, const Vector& u,
                    std::vector<SymTensor2>& E, std::vector<SymTensor2>& S) {
  E.resize(disc.num_elements());
  S.resize(disc.num_elements());
  for (std::size_t e = 0; e < disc.num_elements(); ++e) {
    const Tensor2 H = disc.displacement_gradient(e, u);
    E[e] = green_lagrange(H);
    S[e] = model.stress(cauchy_green_from_strain(E[e]));
  }
}

/// Total potential: stored energy minus the work of the external loads.
template <HyperelasticModel Model>
double potential_energy(const Discretization& disc, const Model& model, const Vector& u, const Vector& fext) {
  double pi = -fext.dot(u);
  for (std::size_t e = 0; e < disc.num_elements(); ++e) {
    const Tensor2 F = Tensor2::Identity() + disc.displacement_gradient(e, u);
    pi += disc.area(e) * model.energy(right_cauchy_green(F));
  }
  return pi;
}

namespace detail {

// Factorises the free-dof tangent; falls back to LU when LDLT fails.
class LinearSolver {
 public:
  bool factorize(const SparseMatrix& k) {
    ldlt_.compute(k);
    use_lu_ = ldlt_.info() != Eigen::Success;
    if (use_lu_) {
      lu_.analyzePattern(k);
      lu_.factorize(k);
      return lu_.info() == Eigen::Success;
    }
    return true;
  }
  Vector solve(const Vector& b) { return use_lu_ ? Vector(lu_.solve(b)) : Vector(ldlt_.solve(b)); }

 private:
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool use_lu_ = false;
};

}  // namespace detail

/// Incremental Newton solve with `n_load_steps` equal load increments.
template <HyperelasticModel Model>
FESolution newton_solve(const Discretization& disc, const Model& model, const BoundaryConditions& bcs,
                        int n_load_steps, const NewtonOptions& opt = {}) {
  if (n_load_steps < 1) throw InvalidConfig("n_load_steps must be >= 1");
  const DofConstraints c = build_constraints(disc, bcs);
  FESolution sol;
  Vector u = Vector::Zero(static_cast<Eigen::Index>(disc.num_dofs()));
  detail::LinearSolver solver;

  for (int step = 1; step <= n_load_steps; ++step) {
    const double lf = static_cast<double>(step) / n_load_steps;
    const Vector fext = lf * c.external;
    // Tangent predictor carries the prescribed displacement increment into the
    // free dofs; without it the first iterate squeezes the boundary layer.
    Vector du_fixed = Vector::Zero(u.size());
    for (int d : c.fixed_dofs) du_fixed[d] = lf * c.fixed_values[d] - u[d];
    if (du_fixed.squaredNorm() > 0.0) {
      Vector trial = u + du_fixed;
      try {
        const Assembly a0 = assemble(disc, model, u, true);
        const Vector r0 = a0.internal - fext + a0.tangent * du_fixed;
        Vector rf(c.num_free());
        for (int i = 0; i < c.num_free(); ++i) rf[i] = r0[c.free_dofs[static_cast<std::size_t>(i)]];
        if (solver.factorize(restrict_free(a0.tangent, c))) {
          const Vector dp = solver.solve(-rf);
          Vector pred = trial;
          for (int i = 0; i < c.num_free(); ++i) pred[c.free_dofs[static_cast<std::size_t>(i)]] += dp[i];
          bool ok = dp.allFinite();
          for (std::size_t e = 0; e < disc.num_elements() && ok; ++e)
            ok = (Tensor2::Identity() + disc.displacement_gradient(e, pred)).determinant() > 0.0;
          if (ok) trial = std::move(pred);
        }
      } catch (const NonInvertibleDeformation&) {
      }
      u = std::move(trial);
    }
    StepRecord rec;
    rec.load_factor = lf;
    bool converged = false;
    for (int it = 0; it <= opt.max_iterations; ++it) {
      Assembly asmb;
      try {
        asmb = assemble(disc, model, u, true);
      } catch (const NonInvertibleDeformation& ex) {
        throw NewtonDivergence(std::string("load step ") + std::to_string(step) + ": " + ex.what());
      }
      const Vector r = asmb.internal - fext;
      Vector rf(c.num_free());
      for (int i = 0; i < c.num_free(); ++i) rf[i] = r[c.free_dofs[static_cast<std::size_t>(i)]];
      const double scale = std::max(fext.norm(), asmb.internal.norm());
      const double rnorm = rf.norm();
      rec.residual_history.push_back(scale > 0.0 ? rnorm / scale : rnorm);
      rec.residual_norms.push_back(rnorm);
      if (!std::isfinite(rnorm)) throw NewtonDivergence("non-finite residual");
      if (rnorm <= opt.rel_tol * scale || rnorm < 1e-14) {
        converged = true;
        break;
      }
      if (it == opt.max_iterations) break;
      if (!solver.factorize(restrict_free(asmb.tangent, c))) throw NewtonDivergence("singular tangent");
      const Vector du = solver.solve(-rf);
      // Backtracking: keep every element invertible and, away from the
      // solution, require sufficient decrease of the potential energy.
      const double slope = rf.dot(du);
      const bool armijo = rec.residual_history.back() > 1e-6 && slope < 0.0;
      const double pi0 = armijo ? potential_energy(disc, model, u, fext) : 0.0;
      double alpha = 1.0;
      for (int cut = 0;; ++cut) {
        Vector trial = u;
        for (int i = 0; i < c.num_free(); ++i) trial[c.free_dofs[static_cast<std::size_t>(i)]] += alpha * du[i];
        bool ok = true;
        for (std::size_t e = 0; e < disc.num_elements() && ok; ++e)
          ok = (Tensor2::Identity() + disc.displacement_gradient(e, trial)).determinant() > 0.0;
        if (ok && armijo && cut < 12) ok = potential_energy(disc, model, trial, fext) <= pi0 + 1e-4 * alpha * slope;
        if (ok) {
          u = std::move(trial);
          break;
        }
        if (cut == 30) throw NewtonDivergence("line search could not keep elements invertible");
        alpha *= 0.5;
      }
      ++sol.total_iterations;
    }
    if (!converged) throw NewtonDivergence("load step " + std::to_string(step) + " did not converge");
    rec.u = u;
    element_states(disc, model, u, rec.E, rec.S);
    sol.history.push_back(std::move(rec));
  }
  sol.u = u;
  sol.E = sol.history.back().E;
  sol.S = sol.history.back().S;
  return sol;
}

/// Strain-stress-energy sample at an element centre.
struct CenterSample {
  int step = 0;
  int element = 0;
  PhasePoint z;
  double psi = 0.0;
};

/// One sample per load step and element, taken from the converged history.
template <HyperelasticModel Model>
std::vector<CenterSample> sample_centers(const FESolution& sol, const Model& law) {
  std::vector<CenterSample> rows;
  for (std::size_t s = 0; s < sol.history.size(); ++s) {
    const StepRecord& rec = sol.history[s];
    for (std::size_t e = 0; e < rec.E.size(); ++e) {
      const SymTensor2 C = cauchy_green_from_strain(rec.E[e]);
      rows.push_back({static_cast<int>(s) + 1, static_cast<int>(e), {rec.E[e], rec.S[e]}, law.energy(C)});
    }
  }
  return rows;
}

/// Displacement of a node.
inline Point2 nodal_displacement(const Vector& u, int node) { return {u[2 * node], u[2 * node + 1]}; }

// ---------------------------------------------------------------------------
// Benchmark boundary conditions.

/// Cook membrane: left edge clamped, vertical traction on the right edge.
inline BoundaryConditions cook_bcs(double traction = 20.0) {
  BoundaryConditions b;
  b.dirichlet.push_back({"left", true, true, Point2::Zero()});
  b.neumann.push_back({"right", Point2(0.0, traction)});
  return b;
}

/// Punch: downward traction q on the loaded half of the top edge.
inline BoundaryConditions punch_bcs(double q = 100.0) {
  BoundaryConditions b;
  b.dirichlet.push_back({"left", true, false, Point2::Zero()});
  b.dirichlet.push_back({"bottom", false, true, Point2::Zero()});
  b.neumann.push_back({"load", Point2(0.0, -q)});
  return b;
}

}  // namespace ddlab
