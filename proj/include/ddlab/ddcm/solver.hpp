#pragma once

// Alternating data-driven solver: equilibrium projection of the material
// states followed by a local assignment (nearest point or LCE) per element.

#include <Eigen/SparseLU>

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "ddlab/ddcm/database.hpp"
#include "ddlab/ddcm/lce.hpp"
#include "ddlab/ddcm/metric.hpp"
#include "ddlab/ddcm/search.hpp"
#include "ddlab/fem.hpp"

namespace ddlab {

enum class DDVariant { DD, DDiso, DDLC, DDLCiso };

inline bool uses_orbits(DDVariant v) { return v == DDVariant::DDiso || v == DDVariant::DDLCiso; }
inline bool uses_lce(DDVariant v) { return v == DDVariant::DDLC || v == DDVariant::DDLCiso; }

inline std::string variant_name(DDVariant v) {
  switch (v) {
    case DDVariant::DD: return "dd";
    case DDVariant::DDiso: return "ddiso";
    case DDVariant::DDLC: return "ddlc";
    case DDVariant::DDLCiso: return "ddlciso";
  }
  return "?";
}

inline DDVariant variant_from_name(std::string_view s) {
  for (DDVariant v : {DDVariant::DD, DDVariant::DDiso, DDVariant::DDLC, DDVariant::DDLCiso})
    if (s == variant_name(v)) return v;
  throw InvalidConfig("unknown data-driven variant '" + std::string(s) + "'");
}

struct DDConfig {
  DDVariant variant = DDVariant::DD;
  double outer_tol = 1e-8;
  int outer_max_iters = 50;
  double inner_tol = 1e-10;
  int inner_max_iters = 20;
  int k_lce = 20;
  int n_orbits = 100;
  std::uint64_t seed = 0;
  double lce_rho_factor = 0.1;
  int load_steps = 4;
  /// Final distance ratio above which the run is reported as diverged.
  double divergence_ratio = 1.0;
  /// Replaces the estimated metric when set.
  std::optional<Mat3> metric;

  void validate() const {
    if (!(outer_tol > 0.0 && inner_tol > 0.0)) throw InvalidConfig("tolerances must be positive");
    if (outer_max_iters < 1 || inner_max_iters < 1 || k_lce < 1 || n_orbits < 1 || load_steps < 1)
      throw InvalidConfig("iteration counts must be >= 1");
  }
};

struct DDState {
  Vector u;
  Vector eta;
  std::vector<PhasePoint> mech;
  std::vector<PhasePoint> mat;
};

struct ConvergenceRecord {
  int step = 0;
  int iteration = 0;
  double distance = 0.0;
  double ratio = 0.0;
  int inner_iterations = 0;
};

struct ConvergenceLog {
  std::vector<ConvergenceRecord> records;

  void write_csv(std::ostream& os) const {
    os << "step,iteration,distance,ratio,inner_iterations\n" << std::setprecision(17);
    for (const auto& r : records)
      os << r.step << ',' << r.iteration << ',' << r.distance << ',' << r.ratio << ',' << r.inner_iterations << '\n';
  }
};

enum class DDStatus { Converged, NonConverged, Diverged };

inline std::string status_name(DDStatus s) {
  return s == DDStatus::Converged ? "ok" : s == DDStatus::NonConverged ? "nonconverged" : "diverged";
}

struct DDResult {
  DDState state;
  ConvergenceLog log;
  DDStatus status = DDStatus::Converged;
  std::string message;
  int outer_iterations = 0;
  MetricTensor metric;
};

/// Weighted squared distance sum_e A_e ||a_e - b_e||^2.
inline double phase_distance2(const Discretization& disc, const MetricTensor& m, const std::vector<PhasePoint>& a,
                              const std::vector<PhasePoint>* b) {
  double d = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e)
    d += disc.area(e) * local_norm_squared(b ? a[e] - (*b)[e] : a[e], m);
  return d;
}

/// Newton solver for the saddle problem
///   min_u max_eta  sum_e A_e [ |E(u) - E*|_C^2 / 2 - |dE|_C^2 / 2 - S* : dE ] + f . eta,
/// dE = sym(F^T grad eta), obtained after eliminating S = S* + C dE.
class EquilibriumProjector {
 public:
  EquilibriumProjector(const Discretization& disc, const BoundaryConditions& bcs, const MetricTensor& metric)
      : disc_(disc), c_(build_constraints(disc, bcs)), metric_(metric) {}

  const DofConstraints& constraints() const { return c_; }

  /// Updates state.u, state.eta and state.mech; returns the Newton iteration count.
  int project(double load_factor, const std::vector<PhasePoint>& mat, DDState& s, double tol, int max_iters) {
    const Mat3& C = metric_.matrix();
    const int nf = c_.num_free();
    const Eigen::Index ndof = static_cast<Eigen::Index>(disc_.num_dofs());
    if (s.u.size() != ndof) s.u = Vector::Zero(ndof);
    if (s.eta.size() != ndof) s.eta = Vector::Zero(ndof);
    for (int d : c_.fixed_dofs) {
      s.u[d] = load_factor * c_.fixed_values[d];
      s.eta[d] = 0.0;
    }
    const Vector fext = load_factor * c_.external;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(disc_.num_elements() * 4 * 36);
    for (int it = 0;; ++it) {
      Vector ru = Vector::Zero(ndof), reta = fext;
      Vector fs = Vector::Zero(ndof), fsig = Vector::Zero(ndof);
      trip.clear();
      for (std::size_t e = 0; e < disc_.num_elements(); ++e) {
        const Tensor2 H = disc_.displacement_gradient(e, s.u);
        const Tensor2 G = disc_.displacement_gradient(e, s.eta);
        const Tensor2 F = Tensor2::Identity() + H;
        const ElementB B = disc_.strain_operator(e, F);
        const ElementB BG = disc_.strain_operator(e, G);
        const Vec3 dE = green_lagrange(H).mandel() - mat[e].E.mandel();
        const Vec3 sig = C * dE;
        const Vec3 st = mat[e].S.mandel() + C * SymTensor2::from_matrix(0.5 * (F.transpose() * G + G.transpose() * F)).mandel();
        const double a = disc_.area(e);
        const auto dofs = disc_.element_dofs(e);
        const Eigen::Matrix<double, 6, 1> fu = a * (B.transpose() * sig - BG.transpose() * st);
        const Eigen::Matrix<double, 6, 1> fe = a * (B.transpose() * st);
        const Eigen::Matrix<double, 6, 1> fg = a * (B.transpose() * sig);
        for (int i = 0; i < 6; ++i) {
          ru[dofs[i]] += fu[i];
          reta[dofs[i]] -= fe[i];
          fs[dofs[i]] += fe[i];
          fsig[dofs[i]] += fg[i];
        }

        const Eigen::Matrix<double, 3, 6> CB = C * B;
        Eigen::Matrix<double, 6, 6> kuu = a * (B.transpose() * CB - BG.transpose() * C * BG);
        Eigen::Matrix<double, 6, 6> kue = -a * (BG.transpose() * CB);
        const Eigen::Matrix<double, 6, 6> kee = -a * (B.transpose() * CB);
        const ShapeGradients& g = disc_.shape_gradients(e);
        const Tensor2 sig_m = SymTensor2::from_mandel(sig).matrix();
        const Tensor2 st_m = SymTensor2::from_mandel(st).matrix();
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) {
            const double gs = a * g.row(p).dot(sig_m * g.row(q).transpose());
            const double gt = a * g.row(p).dot(st_m * g.row(q).transpose());
            for (int i = 0; i < 2; ++i) {
              kuu(2 * p + i, 2 * q + i) += gs;
              kue(2 * p + i, 2 * q + i) -= gt;
            }
          }
        for (int i = 0; i < 6; ++i) {
          const int fi = c_.free_index[static_cast<std::size_t>(dofs[i])];
          if (fi < 0) continue;
          for (int j = 0; j < 6; ++j) {
            const int fj = c_.free_index[static_cast<std::size_t>(dofs[j])];
            if (fj < 0) continue;
            trip.emplace_back(fi, fj, kuu(i, j));
            trip.emplace_back(fi, nf + fj, kue(i, j));
            trip.emplace_back(nf + fj, fi, kue(i, j));
            trip.emplace_back(nf + fi, nf + fj, kee(i, j));
          }
        }
      }

      Vector r(2 * nf);
      for (int i = 0; i < nf; ++i) {
        r[i] = ru[c_.free_dofs[static_cast<std::size_t>(i)]];
        r[nf + i] = reta[c_.free_dofs[static_cast<std::size_t>(i)]];
      }
      const double rnorm = r.norm();
      const double scale = std::max({fext.norm(), fs.norm(), fsig.norm()});
      if (!std::isfinite(rnorm)) throw InnerSolverFailure("non-finite projection residual");
      if (rnorm <= tol * scale || rnorm == 0.0) {
        update_mech(mat, s);
        return it;
      }
      if (it >= max_iters)
        throw InnerSolverFailure("equilibrium projection did not converge (relative residual " +
                                 std::to_string(rnorm / scale) + ")");

      SparseMatrix k(2 * nf, 2 * nf);
      k.setFromTriplets(trip.begin(), trip.end());
      k.makeCompressed();
      if (!analyzed_) {
        lu_.analyzePattern(k);
        analyzed_ = true;
      }
      lu_.factorize(k);
      if (lu_.info() != Eigen::Success) throw InnerSolverFailure("singular projection system");
      const Vector dx = lu_.solve(-r);
      if (!dx.allFinite()) throw InnerSolverFailure("non-finite projection update");
      for (int i = 0; i < nf; ++i) {
        s.u[c_.free_dofs[static_cast<std::size_t>(i)]] += dx[i];
        s.eta[c_.free_dofs[static_cast<std::size_t>(i)]] += dx[nf + i];
      }
    }
  }

 private:
  void update_mech(const std::vector<PhasePoint>& mat, DDState& s) const {
    const Mat3& C = metric_.matrix();
    s.mech.resize(disc_.num_elements());
    for (std::size_t e = 0; e < disc_.num_elements(); ++e) {
      const Tensor2 H = disc_.displacement_gradient(e, s.u);
      const Tensor2 G = disc_.displacement_gradient(e, s.eta);
      const Tensor2 F = Tensor2::Identity() + H;
      const SymTensor2 de = SymTensor2::from_matrix(0.5 * (F.transpose() * G + G.transpose() * F));
      s.mech[e] = {green_lagrange(H), mat[e].S + SymTensor2::from_mandel(C * de.mandel())};
    }
  }

  const Discretization& disc_;
  DofConstraints c_;
  MetricTensor metric_;
  Eigen::SparseLU<SparseMatrix> lu_;
  bool analyzed_ = false;
};

/// Convenience wrapper around EquilibriumProjector::project.
inline int equilibrium_projection(const std::vector<PhasePoint>& mat, DDState& state, const Discretization& disc,
                                  const BoundaryConditions& bcs, const MetricTensor& metric, const DDConfig& cfg,
                                  double load_factor = 1.0) {
  EquilibriumProjector p(disc, bcs, metric);
  return p.project(load_factor, mat, state, cfg.inner_tol, cfg.inner_max_iters);
}

/// Small-strain solve with the metric as elasticity tensor; used to seed the iteration.
inline Vector linear_metric_solve(const Discretization& disc, const DofConstraints& c, const Mat3& C, double lf) {
  const Eigen::Index ndof = static_cast<Eigen::Index>(disc.num_dofs());
  Vector u = Vector::Zero(ndof);
  for (int d : c.fixed_dofs) u[d] = lf * c.fixed_values[d];
  std::vector<Eigen::Triplet<double>> trip;
  Vector rhs = lf * c.external;
  SparseMatrix kfull(ndof, ndof);
  for (std::size_t e = 0; e < disc.num_elements(); ++e) {
    const ElementB B = disc.strain_operator(e, Tensor2::Identity());
    const Eigen::Matrix<double, 6, 6> ke = disc.area(e) * B.transpose() * C * B;
    const auto dofs = disc.element_dofs(e);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) trip.emplace_back(dofs[i], dofs[j], ke(i, j));
  }
  kfull.setFromTriplets(trip.begin(), trip.end());
  rhs -= kfull * u;
  Vector rf(c.num_free());
  for (int i = 0; i < c.num_free(); ++i) rf[i] = rhs[c.free_dofs[static_cast<std::size_t>(i)]];
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(restrict_free(kfull, c));
  if (ldlt.info() != Eigen::Success) throw InnerSolverFailure("singular linear seed system");
  const Vector uf = ldlt.solve(rf);
  for (int i = 0; i < c.num_free(); ++i) u[c.free_dofs[static_cast<std::size_t>(i)]] = uf[i];
  return u;
}

/// Runs the alternating scheme over cfg.load_steps equal load increments.
inline DDResult dd_solve(const Discretization& disc, const BoundaryConditions& bcs, const MaterialDatabase& db,
                         const DDConfig& cfg) {
  cfg.validate();
  if (db.points.empty()) throw DegenerateDatabase("empty material database");
  DDResult res;
  res.metric = cfg.metric ? MetricTensor(*cfg.metric) : estimate_metric(db.points);
  const MaterialDatabase work = uses_orbits(cfg.variant) ? enrich_isotropic(db, cfg.n_orbits) : db;
  const SearchIndex ix(work.points, res.metric);
  const bool lce = uses_lce(cfg.variant);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.k_lce), ix.size());
  EquilibriumProjector proj(disc, bcs, res.metric);
  const std::size_t ne = disc.num_elements();

  std::vector<std::size_t> assigned(ne, 0);
  auto assign = [&](const std::vector<PhasePoint>& mech, std::vector<PhasePoint>& mat) {
    mat.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      if (lce) {
        mat[e] = lce_project(mech[e], ix, k, cfg.lce_rho_factor).z;
      } else {
        const Neighbor n = ix.nearest(mech[e]);
        assigned[e] = n.index;
        mat[e] = ix.point(n.index);
      }
    }
  };

  DDState& s = res.state;
  try {
    // Seed: linear solve with the metric, then a first assignment.
    const double lf0 = 1.0 / cfg.load_steps;
    s.u = linear_metric_solve(disc, proj.constraints(), res.metric.matrix(), lf0);
    s.eta = Vector::Zero(s.u.size());
    s.mech.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      const SymTensor2 E = green_lagrange(disc.displacement_gradient(e, s.u));
      s.mech[e] = {E, SymTensor2::from_mandel(res.metric.matrix() * E.mandel())};
    }
    assign(s.mech, s.mat);

    bool all_converged = true;
    double ratio = 0.0;
    for (int step = 1; step <= cfg.load_steps; ++step) {
      const double lf = static_cast<double>(step) / cfg.load_steps;
      bool converged = false;
      for (int it = 1; it <= cfg.outer_max_iters; ++it) {
        const int inner = proj.project(lf, s.mat, s, cfg.inner_tol, cfg.inner_max_iters);
        ++res.outer_iterations;
        const std::vector<std::size_t> before = assigned;
        std::vector<PhasePoint> mat;
        assign(s.mech, mat);
        const double d2 = phase_distance2(disc, res.metric, s.mech, &mat);
        const double n2 = phase_distance2(disc, res.metric, s.mech, nullptr);
        const double change2 = phase_distance2(disc, res.metric, mat, &s.mat);
        s.mat = std::move(mat);
        ratio = n2 > 0.0 ? std::sqrt(d2 / n2) : std::sqrt(d2);
        res.log.records.push_back({step, it, std::sqrt(d2), ratio, inner});
        if (!std::isfinite(ratio)) throw InnerSolverFailure("non-finite distance");
        // A repeated assignment is a fixed point of the alternating scheme.
        const bool fixed = lce ? std::sqrt(change2) <= cfg.outer_tol * std::max(std::sqrt(n2), 1e-300)
                               : before == assigned || change2 == 0.0;
        if (ratio < cfg.outer_tol || fixed) {
          converged = true;
          break;
        }
      }
      if (!converged) all_converged = false;
    }
    // Material states may have moved in the last assignment; mechanical
    // states are reported as the solution.
    res.status = all_converged ? DDStatus::Converged : DDStatus::NonConverged;
    if (!all_converged) res.message = "outer iterations exhausted";
    if (ratio > cfg.divergence_ratio) {
      res.status = DDStatus::Diverged;
      res.message = "distance ratio " + std::to_string(ratio) + " above divergence threshold";
    }
  } catch (const InnerSolverFailure& e) {
    res.status = DDStatus::Diverged;
    res.message = e.what();
  }
  return res;
}

}  // namespace ddlab
