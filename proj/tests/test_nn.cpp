#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ddlab/nn.hpp"
#include "ddlab/nn_train.hpp"
#include "oracles.hpp"

using namespace ddlab;
using oracle::rel_err;

namespace {

NetworkParams random_params(std::mt19937_64& rng, int n = 10) {
  std::uniform_real_distribution<double> w(0.0, 0.5), a(0.1, 1.0);
  NetworkParams p(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < 3; ++i) p.w1(i, j) = w(rng);
    p.alpha[j] = a(rng);
    p.w2[j] = w(rng);
  }
  return p;
}

// Second implementation: invariants recomputed from scratch, plain exp.
double naive_energy(const NetworkParams& p, const SymTensor2& C) {
  const double tr = C.a11 + C.a22;
  const double det = C.a11 * C.a22 - C.a12 * C.a12;
  const double x[3] = {tr + 1.0 - 3.0, det + tr - 3.0, det - 1.0};
  double psi = 0.0;
  for (int j = 0; j < p.n_hidden(); ++j) {
    double z = 0.0;
    for (int i = 0; i < 3; ++i) z += p.w1(i, j) * x[i];
    psi += p.w2[j] * (std::exp(p.alpha[j] * z) - 1.0);
  }
  return psi;
}

}  // namespace

TEST(Activation, Examples) {
  EXPECT_EQ(activation(0.0, 3.7), 0.0);
  EXPECT_EQ(activation(0.0, -1.0), 0.0);
  EXPECT_NEAR(activation(1.0, 1.0), std::exp(1.0) - 1.0, 1e-15);
  EXPECT_NEAR(activation(1.0, -2.0), std::exp(-2.0) - 1.0, 1e-15);
  EXPECT_GT(activation(50.0, -2.0), -1.0 - 1e-15);
  EXPECT_TRUE(std::isinf(activation(1e6, 1.0)));
}

TEST(ForwardEnergy, ZeroAtIdentityForAnyParameters) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    NetworkParams p = random_params(rng, 1 + t % 7);
    for (int j = 0; j < p.n_hidden(); ++j) {
      p.alpha[j] = n(rng);
      p.w2[j] = n(rng);
    }
    EXPECT_EQ(forward_energy(p, SymTensor2::identity()), 0.0);
  }
}

TEST(ForwardEnergy, HandEvaluatedSingleNeuron) {
  NetworkParams p(1);
  p.w1(0, 0) = 1.0;
  p.alpha[0] = 1.0;
  p.w2[0] = 2.0;
  const SymTensor2 C{2.0, 1.0, 0.0};  // I1 = 4
  EXPECT_NEAR(forward_energy(p, C), 2.0 * (std::exp(1.0) - 1.0), 1e-14);
}

TEST(ForwardEnergy, MatchesIndependentImplementation) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const NetworkParams p = random_params(rng);
    const SymTensor2 C = oracle::random_spd(rng, 0.4, 2.5);
    const double ref = naive_energy(p, C);
    EXPECT_NEAR(forward_energy(p, C), ref, 1e-12 * std::max(1.0, std::abs(ref)));
  }
  EXPECT_THROW(forward_energy(random_params(rng), {1.0, -1.0, 0.0}), NonPositiveDefinite);
}

TEST(NNStress, MatchesFiniteDifferencesOfEnergy) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const NetworkParams p = random_params(rng);
    const SymTensor2 C = oracle::random_spd(rng);
    const SymTensor2 fd = oracle::fd_stress([&](const SymTensor2& c) { return forward_energy(p, c); }, C);
    worst = std::max(worst, rel_err(nn_stress(p, C), fd));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(NNStress, SmallResidualStressAtIdentity) {
  std::mt19937_64 rng(4);
  const NetworkParams p = random_params(rng);
  const SymTensor2 s = nn_stress(p, SymTensor2::identity());
  EXPECT_TRUE(s.mandel().allFinite());
  EXPECT_GT(s.norm(), 0.0);
  EXPECT_EQ(s.a12, 0.0);
}

TEST(NNStress, Objectivity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  const NetworkParams p = random_params(rng);
  for (int t = 0; t < 50; ++t) {
    const SymTensor2 C = oracle::random_spd(rng);
    const double th = ang(rng);
    const Tensor2 q = rotation(th);
    const SymTensor2 lhs = nn_stress(p, rotate(C, q));
    const SymTensor2 rhs = rotate(nn_stress(p, C), q);
    EXPECT_LT((lhs - rhs).norm(), 1e-10 * std::max(1.0, rhs.norm()));
  }
}

TEST(NNTangent, MatchesFiniteDifferencesAndIsSymmetric) {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const NetworkParams p = random_params(rng);
    const SymTensor2 C = oracle::random_spd(rng);
    const Mat3 d = nn_tangent(p, C);
    const Mat3 fd = oracle::fd_tangent([&](const SymTensor2& c) { return nn_stress(p, c); }, C);
    worst = std::max(worst, rel_err(d, fd));
    EXPECT_LT((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, d.norm()));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(NNTangent, ZeroNetworkHasZeroTangent) {
  std::mt19937_64 rng(7);
  NetworkParams p = random_params(rng);
  p.w2.setZero();
  EXPECT_EQ(nn_tangent(p, oracle::random_spd(rng)), Mat3::Zero());
}

TEST(Hessian, PositiveSemidefiniteForNonNegativeOutputWeights) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> inv(-1.0, 2.0);
  double min_eig = 1.0;
  for (int t = 0; t < 1000; ++t) {
    const NetworkParams p = random_params(rng);
    const Invariants point{3.0 + inv(rng), 3.0 + inv(rng), 1.0 + inv(rng)};
    const Mat3 h = hessian_invariants(p, point);
    EXPECT_EQ(h, h.transpose());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat3>(h).eigenvalues()[0]);
  }
  EXPECT_GE(min_eig, -1e-10);
}

TEST(Hessian, SingleNeuronIsRankOneOuterProduct) {
  NetworkParams p(1);
  p.w1.col(0) = Vec3(0.3, 0.1, 0.4);
  p.alpha[0] = 0.7;
  p.w2[0] = 1.5;
  const Invariants point{3.2, 3.1, 1.05};
  const Vec3 w = p.w1.col(0);
  const double a = p.w2[0] * p.alpha[0] * p.alpha[0] * std::exp(p.alpha[0] * w.dot(point.shifted()));
  const Mat3 h = hessian_invariants(p, point);
  EXPECT_LT((h - a * w * w.transpose()).norm(), 1e-14 * h.norm());
  Eigen::JacobiSVD<Mat3> svd(h);
  EXPECT_LT(svd.singularValues()[1], 1e-12 * svd.singularValues()[0]);
}

TEST(Hessian, NegativeOutputWeightCanBreakConvexity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> inv(-0.5, 0.5);
  bool found = false;
  for (int t = 0; t < 1000 && !found; ++t) {
    NetworkParams p = random_params(rng, 3);
    p.w2[1] = -1.0;
    const Invariants point{3.0 + inv(rng), 3.0 + inv(rng), 1.0 + inv(rng)};
    found = Eigen::SelfAdjointEigenSolver<Mat3>(hessian_invariants(p, point)).eigenvalues()[0] < -1e-6;
  }
  EXPECT_TRUE(found);
}

TEST(Loss, Examples) {
  std::mt19937_64 rng(10);
  const NetworkParams p = random_params(rng);
  const SymTensor2 C{1.1, 0.95, 0.05};
  const double psi = forward_energy(p, C);
  const SymTensor2 s = nn_stress(p, C);

  const std::vector<LabeledSample> exact{{C, psi, s}};
  EXPECT_NEAR(loss(p, exact, LossKind::Energy), 0.0, 1e-28);
  EXPECT_NEAR(loss(p, exact, LossKind::Stress), 0.0, 1e-24);

  const std::vector<LabeledSample> shifted{{C, psi + 0.3, s + SymTensor2{0.1, -0.2, 0.05}}};
  EXPECT_NEAR(loss(p, shifted, LossKind::Energy), 0.09, 1e-12);
  // Frobenius norm of a symmetric 2x2 counts the shear entry twice.
  EXPECT_NEAR(loss(p, shifted, LossKind::Stress), 0.01 + 0.04 + 2 * 0.0025, 1e-12);

  const std::vector<LabeledSample> unlabeled{{C, std::nullopt, s}};
  EXPECT_THROW(loss(p, unlabeled, LossKind::Energy), MissingTargets);
}

TEST(Serialization, RoundTripIsExact) {
  std::mt19937_64 rng(11);
  NetworkParams p = random_params(rng, 10);
  p.alpha[3] = 1.0 / 3.0;
  p.w1(1, 2) = -std::ldexp(1.0, -60);
  std::stringstream ss;
  write_network(ss, p);
  EXPECT_EQ(read_network(ss), p);

  std::stringstream bad("ddlab-nn v1\nn_hidden 2\nw1 1 2\nw1 1\n");
  EXPECT_THROW(read_network(bad), MalformedFile);
  std::stringstream wrong_header("something else\n");
  EXPECT_THROW(read_network(wrong_header), MalformedFile);
}
