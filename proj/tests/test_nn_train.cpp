#include <gtest/gtest.h>

#include <random>

#include "ddlab/materials.hpp"
#include "ddlab/nn_train.hpp"
#include "oracles.hpp"

using namespace ddlab;

namespace {

std::vector<LabeledSample> ciarlet_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Ciarlet law;
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    const SymTensor2 C = oracle::random_spd(rng, 0.8, 1.25);
    out.emplace_back(C, law.energy(C), law.stress(C));
  }
  return out;
}


}  // namespace

TEST(Training, LossGradientMatchesFiniteDifferences) {
  const auto data = ciarlet_samples(7, 1);
  std::vector<detail::PreparedSample> prepared;
  for (const auto& s : data) prepared.push_back(detail::prepare(s));
  std::mt19937_64 rng(2);
  const NetworkParams p = random_network(4, rng);

  for (LossKind kind : {LossKind::Energy, LossKind::Stress}) {
    detail::Gradient g(4);
    detail::loss_and_gradient(p, prepared, kind, &g);
    auto check = [&](auto access, double analytic) {
      const double h = 1e-5;
      auto f = [&](double t) {
        NetworkParams q = p;
        access(q) += t;
        return detail::loss_and_gradient(q, prepared, kind, nullptr);
      };
      const double fd = oracle::diff5(f, h);
      EXPECT_NEAR(analytic, fd, 1e-6 * std::max(1.0, std::abs(fd)));
    };
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 3; ++i) check([&](NetworkParams& q) -> double& { return q.w1(i, j); }, g.w1(i, j));
      check([&](NetworkParams& q) -> double& { return q.alpha[j]; }, g.alpha[j]);
      check([&](NetworkParams& q) -> double& { return q.w2[j]; }, g.w2[j]);
    }
  }
}

TEST(Training, DeterministicForFixedSeed) {
  const auto data = ciarlet_samples(40, 3);
  TrainingConfig cfg;
  cfg.max_epochs = 300;
  cfg.patience = 100;
  cfg.restarts = 3;
  cfg.seed = 17;
  const auto [a, ra] = train(data, cfg);
  const auto [b, rb] = train(data, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ra.train_indices, rb.train_indices);
  EXPECT_EQ(ra.best_restart, rb.best_restart);

  cfg.threads = 3;
  const auto [c, rc] = train(data, cfg);
  EXPECT_EQ(a, c);

  cfg.threads = 1;
  cfg.seed = 18;
  EXPECT_NE(train(data, cfg).first, a);
}

TEST(Training, SplitAndSelection) {
  const auto data = ciarlet_samples(40, 4);
  TrainingConfig cfg;
  cfg.max_epochs = 200;
  cfg.restarts = 4;
  const auto [p, report] = train(data, cfg);
  EXPECT_EQ(report.train_indices.size(), 30u);
  EXPECT_EQ(report.validation_indices.size(), 10u);
  for (const auto& r : report.restarts)
    EXPECT_GE(r.best_validation_loss,
              report.restarts[static_cast<std::size_t>(report.best_restart)].best_validation_loss);
  EXPECT_TRUE((p.w2.array() >= 0.0).all());
}

TEST(Training, NonNegativeOutputWeightsAfterEveryRun) {
  // Targets with negative energies push w2 below zero; the clamp must hold.
  std::vector<LabeledSample> data;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const SymTensor2 C = oracle::random_spd(rng, 1.1, 1.5);
    data.emplace_back(C, -5.0, std::nullopt);
  }
  TrainingConfig cfg;
  cfg.loss_kind = LossKind::Energy;
  cfg.max_epochs = 500;
  cfg.restarts = 2;
  cfg.learning_rate = 1e-2;
  const auto [p, report] = train(data, cfg);
  for (const auto& r : report.restarts) EXPECT_TRUE((r.params.w2.array() >= 0.0).all());
}

TEST(Training, MemorizesRepeatedSample) {
  const Ciarlet law;
  const SymTensor2 C{1.2, 0.9, 0.1};
  std::vector<LabeledSample> data(8, LabeledSample(C, law.energy(C), law.stress(C)));
  TrainingConfig cfg;
  cfg.max_epochs = 20000;
  cfg.patience = 20000;
  cfg.restarts = 1;
  cfg.learning_rate = 1e-2;
  const auto [p, report] = train(data, cfg);
  const double l0 = loss(random_network(10, *std::make_unique<std::mt19937_64>(1)), data, LossKind::Stress);
  const double l = report.restarts[0].train_loss;
  EXPECT_LT(l, 1e-8 * l0);
}

TEST(Training, ErrorContracts) {
  const auto data = ciarlet_samples(10, 6);
  TrainingConfig cfg;
  cfg.split = 1.0;
  EXPECT_THROW(train(data, cfg), InvalidConfig);
  cfg = {};
  EXPECT_THROW(train(std::span(data).first(1), cfg), InvalidConfig);
  std::vector<LabeledSample> energy_only{{SymTensor2::identity(), 0.0, std::nullopt},
                                         {SymTensor2{1.1, 1.0, 0.0}, 1.0, std::nullopt}};
  EXPECT_THROW(train(energy_only, cfg), MissingTargets);

  // Labels far outside the network range make every restart overflow.
  std::vector<LabeledSample> wild;
  for (int i = 0; i < 4; ++i) wild.emplace_back(SymTensor2{50.0 + i, 50.0, 0.0}, std::nullopt, SymTensor2{1e300, 0, 0});
  cfg.restarts = 2;
  cfg.max_epochs = 10;
  EXPECT_THROW(train(wild, cfg), AllRestartsDiverged);
}
