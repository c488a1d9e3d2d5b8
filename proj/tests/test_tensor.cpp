#include <gtest/gtest.h>

#include <random>

#include "ddlab/tensor.hpp"
#include "oracles.hpp"

using namespace ddlab;

namespace {

void expect_sym_near(const SymTensor2& a, const SymTensor2& b, double tol) {
  EXPECT_NEAR(a.a11, b.a11, tol);
  EXPECT_NEAR(a.a22, b.a22, tol);
  EXPECT_NEAR(a.a12, b.a12, tol);
}

Tensor2 mat(double a, double b, double c, double d) {
  Tensor2 m;
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(GreenLagrange, ZeroDisplacementGivesZeroStrain) {
  expect_sym_near(green_lagrange(Tensor2::Zero()), {}, 0.0);
}

TEST(GreenLagrange, SimpleShear) {
  expect_sym_near(green_lagrange(mat(0, 0.1, 0, 0)), {0.0, 0.005, 0.05}, 1e-15);
}

TEST(GreenLagrange, UniaxialStretch) {
  expect_sym_near(green_lagrange(mat(0.02, 0, 0, 0)), {0.0202, 0.0, 0.0}, 1e-15);
}

TEST(GreenLagrange, RigidRotationIsStrainFree) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int i = 0; i < 200; ++i) {
    const Tensor2 q = rotation(ang(rng));
    expect_sym_near(green_lagrange(q - Tensor2::Identity()), {}, 1e-12);
  }
}

TEST(RightCauchyGreen, Examples) {
  expect_sym_near(right_cauchy_green(Tensor2::Identity()), SymTensor2::identity(), 0.0);
  expect_sym_near(right_cauchy_green(mat(1, 0.1, 0, 1)), {1.0, 1.01, 0.1}, 1e-15);
  expect_sym_near(right_cauchy_green(mat(2, 0, 0, 1)), {4.0, 1.0, 0.0}, 0.0);
}

TEST(RightCauchyGreen, RejectsNonInvertible) {
  EXPECT_THROW(right_cauchy_green(mat(1, 0, 0, 0)), NonInvertibleDeformation);
  EXPECT_THROW(right_cauchy_green(mat(-1, 0, 0, 1)), NonInvertibleDeformation);
}

TEST(Invariants, Examples) {
  const Invariants a = invariants_plane_strain(SymTensor2::identity());
  EXPECT_EQ(a.i1, 3.0);
  EXPECT_EQ(a.i2, 3.0);
  EXPECT_EQ(a.i3, 1.0);
  const Invariants b = invariants_plane_strain({4.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(b.i1, 6.0);
  EXPECT_DOUBLE_EQ(b.i2, 9.0);
  EXPECT_DOUBLE_EQ(b.i3, 4.0);
  const Invariants c = invariants_plane_strain({1.0, 1.01, 0.1});
  EXPECT_NEAR(c.i3, 1.0, 1e-15);
  EXPECT_NEAR(c.i1, 3.01, 1e-15);
}

TEST(Invariants, SecondInvariantMatchesThreeDimensionalDefinition) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const SymTensor2 C = oracle::random_spd(rng);
    Eigen::Matrix3d c3 = Eigen::Matrix3d::Identity();
    c3.topLeftCorner<2, 2>() = C.matrix();
    const double i2 = 0.5 * (c3.trace() * c3.trace() - (c3 * c3).trace());
    const Invariants inv = invariants_plane_strain(C);
    EXPECT_NEAR(inv.i2, i2, 1e-12);
    EXPECT_NEAR(inv.i3, c3.determinant(), 1e-12);
    EXPECT_GT(inv.i3, 0.0);
    EXPECT_GT(inv.i1, 0.0);
  }
}

TEST(Invariants, RejectsNonSpd) {
  EXPECT_THROW(invariants_plane_strain({1.0, -1.0, 0.0}), NonPositiveDefinite);
  EXPECT_THROW(invariants_plane_strain({1.0, 1.0, 2.0}), NonPositiveDefinite);
}

TEST(ShiftedInvariants, Examples) {
  EXPECT_EQ(shifted_invariants(SymTensor2::identity()), Vec3::Zero());
  EXPECT_TRUE(shifted_invariants({4.0, 1.0, 0.0}).isApprox(Vec3(3, 6, 3)));
  EXPECT_LT(shifted_invariants({0.81, 0.81, 0.0})[2], 0.0);
}

TEST(RotatePair, IdentityAndQuarterTurn) {
  const PhasePoint p{{0.1, -0.2, 0.03}, {5.0, 7.0, -1.0}};
  const PhasePoint same = rotate_pair(p, 0.0);
  expect_sym_near(same.E, p.E, 0.0);
  expect_sym_near(same.S, p.S, 0.0);
  const PhasePoint swapped = rotate_pair({{0.3, -0.1, 0.0}, {2.0, 9.0, 0.0}}, M_PI / 2);
  expect_sym_near(swapped.E, {-0.1, 0.3, 0.0}, 1e-15);
  expect_sym_near(swapped.S, {9.0, 2.0, 0.0}, 1e-14);
}

TEST(RotatePair, PreservesEigenvaluesAndInvertsWithNegativeAngle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int i = 0; i < 500; ++i) {
    const PhasePoint p{oracle::random_sym(rng, 0.1), oracle::random_sym(rng, 50.0)};
    const double theta = i == 0 ? 0.3 : ang(rng);
    const PhasePoint r = rotate_pair(p, theta);
    EXPECT_NEAR(r.E.eigenvalues().first, p.E.eigenvalues().first, 1e-12);
    EXPECT_NEAR(r.E.eigenvalues().second, p.E.eigenvalues().second, 1e-12);
    EXPECT_NEAR(r.S.eigenvalues().first, p.S.eigenvalues().first, 1e-12 * 50);
    EXPECT_NEAR(r.S.eigenvalues().second, p.S.eigenvalues().second, 1e-12 * 50);
    EXPECT_NEAR(r.E.norm(), p.E.norm(), 1e-12);
    const PhasePoint back = rotate_pair(r, -theta);
    expect_sym_near(back.E, p.E, 1e-12);
    expect_sym_near(back.S, p.S, 1e-12 * 50);
  }
}

TEST(Mandel, DotProductEqualsDoubleContraction) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10000; ++i) {
    const SymTensor2 a = oracle::random_sym(rng), b = oracle::random_sym(rng);
    const double ref = (a.matrix().array() * b.matrix().array()).sum();
    const double scale = (a.matrix().array() * b.matrix().array()).abs().sum();
    const double dot = a.mandel().dot(b.mandel());
    EXPECT_LE(std::abs(dot - ref), 1e-14 * scale);
    EXPECT_NEAR(contract(a, b), ref, 1e-13);
  }
}

TEST(Mandel, SandwichMatchesDirectProduct) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const SymTensor2 a = oracle::random_sym(rng), x = oracle::random_sym(rng);
    const Vec3 direct = SymTensor2::from_matrix(a.matrix() * x.matrix() * a.matrix()).mandel();
    EXPECT_LT((mandel_sandwich(a) * x.mandel() - direct).norm(), 1e-12 * (1 + direct.norm()));
  }
}
