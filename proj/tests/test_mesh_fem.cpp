#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "ddlab/fem.hpp"
#include "ddlab/nn_train.hpp"
#include "oracles.hpp"

using namespace ddlab;

namespace {

Mesh unit_square(int n) {
  return detail::structured_triangles(
      n, n, [n](int i, int j) { return Point2(double(i) / n, double(j) / n); },
      [](int i, int j) { return (i + j) % 2 == 0; });
}

Mesh rotated_copy(Mesh m, double theta) {
  const Tensor2 q = rotation(theta);
  for (Point2& p : m.nodes) p = q * p;
  return m;
}

// Brute-force scalar root: lateral stretch with S22 = 0 under uniaxial stretch.
double lateral_stretch(const AnalyticLaw& law, double l1) {
  double lo = 0.3, hi = 1.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double s22 = law.stress({l1 * l1, mid * mid, 0.0}).a22;
    (s22 > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

template <class Model>
void expect_tangent_matches_fd(const Discretization& disc, const Model& model, const Vector& u, double tol) {
  const Assembly a = assemble(disc, model, u, true);
  const Eigen::MatrixXd k(a.tangent);
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index d = 0; d < u.size(); ++d) {
    Vector up = u, um = u;
    up[d] += h;
    um[d] -= h;
    const Vector col = (assemble(disc, model, up, false).internal - assemble(disc, model, um, false).internal) / (2 * h);
    worst = std::max(worst, (k.col(d) - col).norm() / std::max(1e-8, col.norm()));
  }
  EXPECT_LT(worst, tol);
}

}  // namespace

TEST(Mesh, CookElementCounts) {
  const Mesh modified = cook_mesh(CookMeshOptions::modified());
  EXPECT_NEAR(double(modified.num_elements()), 888.0, 0.05 * 888);
  const Mesh source = cook_mesh(CookMeshOptions::source());
  EXPECT_EQ(source.num_elements(), 986u);
  // One sample per element and load step over four steps.
  EXPECT_NEAR(4.0 * double(source.num_elements()), 3944.0, 0.05 * 3944);
  for (int n : {1, 2, 5, 13, 40}) {
    const Mesh m = cook_mesh(n);
    for (std::size_t e = 0; e < m.num_elements(); ++e) EXPECT_GT(m.signed_area(e), 0.0);
  }
  for (std::size_t e = 0; e < modified.num_elements(); ++e) EXPECT_GT(modified.signed_area(e), 0.0);
  const Point2 tip = modified.nodes[static_cast<std::size_t>(modified.node("tip"))];
  EXPECT_EQ(tip, Point2(48.0, 60.0));
}

TEST(Mesh, PunchCountsAndGrading) {
  const Mesh m = punch_mesh(37);
  EXPECT_EQ(m.num_elements(), 3108u);
  EXPECT_NEAR(double(m.num_elements()), 3108.0, 0.1 * 3108);
  std::size_t smallest = 0;
  double amin = 1e300, amax = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const double a = m.signed_area(e);
    EXPECT_GT(a, 0.0);
    if (a < amin) {
      amin = a;
      smallest = e;
    }
    amax = std::max(amax, a);
  }
  EXPECT_LT(amin / amax, 0.1);
  const Point2 corner = m.nodes[static_cast<std::size_t>(m.node("tip"))];
  EXPECT_EQ(corner, Point2(0.0, 1.0));
  // The corner cell holds the smallest triangles.
  const Point2 c = m.centroid(smallest);
  const Point2 first = m.nodes[static_cast<std::size_t>(m.node("tip") + 1)];
  EXPECT_LT(c.x(), first.x());
  EXPECT_GT(c.y(), 1.0 - first.x() * 2.0);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Triangle& t = m.triangles[e];
    if (std::find(t.begin(), t.end(), m.node("tip")) != t.end()) EXPECT_NEAR(m.signed_area(e), amin, 1e-12 * amin);
  }
  double load_len = 0.0;
  for (const Edge& e : m.edges("load"))
    load_len += (m.nodes[static_cast<std::size_t>(e[1])] - m.nodes[static_cast<std::size_t>(e[0])]).norm();
  EXPECT_NEAR(load_len, 1.0, 1e-12);
  for (int n : {1, 3, 10}) EXPECT_NO_THROW(punch_mesh(n));
}

TEST(Mesh, GeneratorsAreDeterministicAndRoundTrip) {
  const Mesh a = cook_mesh(CookMeshOptions::modified());
  const Mesh b = cook_mesh(CookMeshOptions::modified());
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.triangles, b.triangles);
  std::stringstream ss;
  write_mesh(ss, a);
  const Mesh c = read_mesh(ss);
  EXPECT_EQ(a.nodes, c.nodes);
  EXPECT_EQ(a.triangles, c.triangles);
  EXPECT_EQ(a.edge_tags, c.edge_tags);
  EXPECT_EQ(a.node_tags, c.node_tags);
  std::stringstream bad("ddlab-mesh v1\nnodes 3\n0 0\n1 0\n");
  EXPECT_THROW(read_mesh(bad), MalformedFile);
  EXPECT_THROW(cook_mesh(0), InvalidConfig);
}

TEST(Assembly, StressFreeReferenceAndTranslationInvariance) {
  const Discretization disc(cook_mesh(6));
  const Ciarlet law;
  const Vector zero = Vector::Zero(Eigen::Index(disc.num_dofs()));
  EXPECT_EQ(assemble(disc, law, zero, false).internal.norm(), 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.05);
  Vector u(zero.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = n(rng);
  Vector shifted = u;
  for (Eigen::Index i = 0; i < u.size(); i += 2) {
    shifted[i] += 3.0;
    shifted[i + 1] -= 1.25;
  }
  const Vector r0 = assemble(disc, law, u, false).internal;
  const Vector r1 = assemble(disc, law, shifted, false).internal;
  EXPECT_LT((r0 - r1).norm(), 1e-10 * r0.norm());
  Vector rigid = zero;
  for (Eigen::Index i = 0; i < u.size(); i += 2) rigid[i] = 7.0;
  EXPECT_LT(assemble(disc, law, rigid, false).internal.norm(), 1e-10);
}

TEST(Assembly, TangentMatchesFiniteDifferences) {
  const Discretization disc(cook_mesh(4));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.3);
  Vector u(Eigen::Index(disc.num_dofs()));
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = n(rng);
  expect_tangent_matches_fd(disc, Ciarlet{}, u, 1e-5);
  expect_tangent_matches_fd(disc, HartmannNeff{}, u, 1e-5);
  expect_tangent_matches_fd(disc, NeuralLaw{random_network(10, rng)}, u, 1e-5);
}

TEST(Assembly, InvertedElementThrows) {
  const Discretization disc(unit_square(1));
  Vector u = Vector::Zero(8);
  u[2 * disc.mesh().node("top_right") + 1] = -3.0;
  u[2 * disc.mesh().node("top_left") + 1] = -3.0;
  EXPECT_THROW(assemble(disc, Ciarlet{}, u), NonInvertibleDeformation);
}

TEST(Newton, HomogeneousUniaxialPatch) {
  const AnalyticLaw laws[2] = {Ciarlet{}, HartmannNeff{}};
  for (const AnalyticLaw& law : laws) {
    for (int n : {1, 4}) {
      const Discretization disc(unit_square(n));
      BoundaryConditions bcs;
      bcs.dirichlet.push_back({"left", true, false, Point2::Zero()});
      bcs.dirichlet.push_back({"bottom", false, true, Point2::Zero()});
      bcs.dirichlet.push_back({"right", true, false, Point2(0.2, 0.0)});
      const FESolution sol = newton_solve(disc, law, bcs, 2);
      const double l2 = lateral_stretch(law, 1.2);
      for (std::size_t e = 0; e < disc.num_elements(); ++e) {
        const Tensor2 F = Tensor2::Identity() + disc.displacement_gradient(e, sol.u);
        EXPECT_NEAR(F(0, 0), 1.2, 1e-10);
        EXPECT_NEAR(F(1, 1), l2, 1e-10);
        EXPECT_NEAR(F(0, 1), 0.0, 1e-10);
        EXPECT_NEAR(F(1, 0), 0.0, 1e-10);
      }
    }
  }
}

TEST(Newton, ZeroLoadStaysAtReference) {
  const Discretization disc(cook_mesh(5));
  const FESolution sol = newton_solve(disc, Ciarlet{}, cook_bcs(0.0), 1);
  EXPECT_EQ(sol.u.norm(), 0.0);
  EXPECT_LE(sol.total_iterations, 1);
}

TEST(Newton, CookConvergesQuadratically) {
  const Discretization disc(cook_mesh(CookMeshOptions::modified()));
  const FESolution sol = newton_solve(disc, Ciarlet{}, cook_bcs(20.0), 4);
  ASSERT_EQ(sol.history.size(), 4u);
  for (const StepRecord& rec : sol.history) {
    ASSERT_GE(rec.residual_history.size(), 2u);
    EXPECT_LE(rec.residual_history.back(), 1e-10);
    const auto& r = rec.residual_norms;
    int tail = 0;
    for (std::size_t k = 0; k + 1 < r.size(); ++k)
      if (r[k] < 1.0) {
        EXPECT_LT(r[k + 1], 10.0 * r[k] * r[k]) << "iterate " << k;
        ++tail;
      }
    EXPECT_GE(tail, 1);
  }
  const Point2 tip = nodal_displacement(sol.u, disc.mesh().node("tip"));
  EXPECT_GT(tip.y(), 1.0);
  for (std::size_t e = 0; e < disc.num_elements(); ++e)
    EXPECT_LT((sol.E[e] - green_lagrange(disc.displacement_gradient(e, sol.u))).norm(), 1e-12);
}

TEST(Newton, TangentConsistentAlongLoadPath) {
  const Discretization disc(cook_mesh(3));
  const FESolution sol = newton_solve(disc, Ciarlet{}, cook_bcs(20.0), 4);
  for (const StepRecord& rec : sol.history) expect_tangent_matches_fd(disc, Ciarlet{}, rec.u, 1e-5);
}

TEST(Newton, DiscreteSolutionIsObjective) {
  const double theta = 0.7;
  const Tensor2 q = rotation(theta);
  const Mesh base = unit_square(5);
  const Discretization d0(base), d1(rotated_copy(base, theta));
  const Point2 v(0.15, 0.1);
  auto check = [&](const auto& law, const Point2& t) {
    BoundaryConditions b0, b1;
    b0.dirichlet.push_back({"bottom", true, true, Point2::Zero()});
    b0.dirichlet.push_back({"top", true, true, v});
    b0.neumann.push_back({"right", t});
    b1.dirichlet.push_back({"bottom", true, true, Point2::Zero()});
    b1.dirichlet.push_back({"top", true, true, q * v});
    b1.neumann.push_back({"right", q * t});
    const FESolution s0 = newton_solve(d0, law, b0, 2);
    const FESolution s1 = newton_solve(d1, law, b1, 2);
    for (std::size_t n = 0; n < base.num_nodes(); ++n) {
      const Point2 expected = q * nodal_displacement(s0.u, int(n));
      EXPECT_LT((nodal_displacement(s1.u, int(n)) - expected).norm(), 1e-8);
    }
  };
  check(Ciarlet{}, Point2(0.0, 8.0));
  check(HartmannNeff{}, Point2(0.0, 0.05));
}

TEST(Sampling, SourceDatasetRows) {
  const Discretization disc(cook_mesh(CookMeshOptions::source()));
  const Ciarlet law;
  const FESolution sol = newton_solve(disc, law, cook_bcs(20.0), 4);
  const auto rows = sample_centers(sol, law);
  EXPECT_EQ(rows.size(), 3944u);
  std::size_t zero_rows = 0;
  for (const CenterSample& r : rows) {
    EXPECT_GE(r.step, 1);
    if (r.z.E == SymTensor2{}) ++zero_rows;
    const SymTensor2 s = law.stress(cauchy_green_from_strain(r.z.E));
    EXPECT_EQ(s, r.z.S);
    EXPECT_EQ(law.energy(cauchy_green_from_strain(r.z.E)), r.psi);
  }
  EXPECT_EQ(zero_rows, 0u);
}
