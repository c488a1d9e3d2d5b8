#pragma once

// Full-batch Adam training of the invariant network on energy or stress
// labels, with random restarts and early stopping on a fixed validation split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ddlab/nn.hpp"

namespace ddlab {

enum class LossKind { Energy, Stress };

struct TrainingConfig {
  LossKind loss_kind = LossKind::Stress;
  double learning_rate = 1e-3;
  int max_epochs = 200000;
  int patience = 5000;
  double split = 0.75;
  int restarts = 10;
  std::uint64_t seed = 0;
  int n_hidden = 10;
  /// Restarts evaluated concurrently; results do not depend on this.
  int threads = 1;
};

struct LabeledSample {
  SymTensor2 C;
  Vec3 x;  // shifted invariants
  std::optional<double> energy;
  std::optional<SymTensor2> stress;

  LabeledSample(const SymTensor2& c, std::optional<double> psi, std::optional<SymTensor2> s)
      : C(c), x(shifted_invariants(c)), energy(psi), stress(s) {}
};

struct RestartResult {
  NetworkParams params;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  double train_loss = std::numeric_limits<double>::infinity();
  int epochs = 0;
  int best_epoch = 0;
  bool diverged = false;
};

struct TrainingReport {
  std::vector<RestartResult> restarts;
  int best_restart = -1;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

namespace detail {

// Per-sample quantities that do not depend on the network parameters.
struct PreparedSample {
  Vec3 x;
  Mat3 g;        // columns: 2 dI_k/dC in Mandel form
  Vec3 target_s;  // Mandel
  double target_psi = 0.0;
};

inline PreparedSample prepare(const LabeledSample& s) {
  PreparedSample p;
  p.x = s.x;
  const Invariants inv = invariants_plane_strain(s.C);
  Vec3 g1, g2, g3;
  invariant_gradients(s.C, inv, g1, g2, g3);
  p.g.col(0) = 2.0 * g1;
  p.g.col(1) = 2.0 * g2;
  p.g.col(2) = 2.0 * g3;
  if (s.stress) p.target_s = s.stress->mandel();
  if (s.energy) p.target_psi = *s.energy;
  return p;
}

struct Gradient {
  Eigen::Matrix<double, 3, Eigen::Dynamic> w1;
  Eigen::VectorXd alpha;
  Eigen::VectorXd w2;
  explicit Gradient(int n)
      : w1(Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n)),
        alpha(Eigen::VectorXd::Zero(n)),
        w2(Eigen::VectorXd::Zero(n)) {}
};

/// Mean loss over `samples`; accumulates its gradient when `grad` is set.
inline double loss_and_gradient(const NetworkParams& p, std::span<const PreparedSample> samples,
                                LossKind kind, Gradient* grad) {
  const int n = p.n_hidden();
  if (samples.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  double total = 0.0;
  std::vector<double> z(n), e(n);
  std::vector<Vec3> v(n);
  for (const PreparedSample& s : samples) {
    for (int j = 0; j < n; ++j) {
      z[j] = p.w1.col(j).dot(s.x);
      e[j] = std::exp(p.alpha[j] * z[j]);
    }
    if (kind == LossKind::Energy) {
      double psi = 0.0;
      for (int j = 0; j < n; ++j) psi += p.w2[j] * (e[j] - 1.0);
      const double r = psi - s.target_psi;
      total += r * r;
      if (grad) {
        const double rho = 2.0 * r * inv_n;
        for (int j = 0; j < n; ++j) {
          grad->w2[j] += rho * (e[j] - 1.0);
          grad->alpha[j] += rho * p.w2[j] * e[j] * z[j];
          grad->w1.col(j) += (rho * p.w2[j] * e[j] * p.alpha[j]) * s.x;
        }
      }
    } else {
      Vec3 stress = Vec3::Zero();
      for (int j = 0; j < n; ++j) {
        v[j] = s.g * p.w1.col(j);
        stress += (p.w2[j] * p.alpha[j] * e[j]) * v[j];
      }
      const Vec3 r = stress - s.target_s;
      total += r.squaredNorm();
      if (grad) {
        const Vec3 rho = (2.0 * inv_n) * r;
        const Vec3 rho_g = s.g.transpose() * rho;
        for (int j = 0; j < n; ++j) {
          const double rv = rho.dot(v[j]);
          const double ae = p.alpha[j] * e[j];
          grad->w2[j] += ae * rv;
          grad->alpha[j] += p.w2[j] * e[j] * (1.0 + p.alpha[j] * z[j]) * rv;
          grad->w1.col(j) += (p.w2[j] * ae) * (p.alpha[j] * rv * s.x + rho_g);
        }
      }
    }
  }
  return total * inv_n;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Mean squared energy residual or mean squared Frobenius stress residual.
inline double loss(const NetworkParams& p, std::span<const LabeledSample> batch, LossKind kind) {
  std::vector<detail::PreparedSample> prepared;
  prepared.reserve(batch.size());
  for (const LabeledSample& s : batch) {
    if (kind == LossKind::Energy && !s.energy) throw MissingTargets("sample lacks an energy label");
    if (kind == LossKind::Stress && !s.stress) throw MissingTargets("sample lacks a stress label");
    prepared.push_back(detail::prepare(s));
  }
  return detail::loss_and_gradient(p, prepared, kind, nullptr);
}

/// Uniform initialisation: w1, w2 in [0, 0.5], alpha in [0.1, 1].
inline NetworkParams random_network(int n_hidden, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight(0.0, 0.5);
  std::uniform_real_distribution<double> exponent(0.1, 1.0);
  NetworkParams p(n_hidden);
  for (int j = 0; j < n_hidden; ++j) {
    for (int i = 0; i < 3; ++i) p.w1(i, j) = weight(rng);
    p.alpha[j] = exponent(rng);
    p.w2[j] = weight(rng);
  }
  return p;
}

/// One training run from a fresh initialisation.
inline RestartResult train_single(std::span<const detail::PreparedSample> train,
                                  std::span<const detail::PreparedSample> validation,
                                  const TrainingConfig& cfg, std::uint64_t seed) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  std::mt19937_64 rng(seed);
  NetworkParams p = random_network(cfg.n_hidden, rng);
  const int n = p.n_hidden();
  const int n_par = 5 * n;

  auto pack = [n](const detail::Gradient& g, Eigen::VectorXd& out) {
    out.segment(0, 3 * n) = Eigen::Map<const Eigen::VectorXd>(g.w1.data(), 3 * n);
    out.segment(3 * n, n) = g.alpha;
    out.segment(4 * n, n) = g.w2;
  };

  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_par);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_par);
  Eigen::VectorXd gvec(n_par);
  RestartResult result;
  result.params = p;
  double b1t = 1.0, b2t = 1.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    detail::Gradient g(n);
    const double train_loss = detail::loss_and_gradient(p, train, cfg.loss_kind, &g);
    if (!std::isfinite(train_loss) || !g.w1.allFinite() || !g.alpha.allFinite() ||
        !g.w2.allFinite()) {
      result.diverged = !std::isfinite(result.best_validation_loss);
      break;
    }
    pack(g, gvec);
    b1t *= kBeta1;
    b2t *= kBeta2;
    m = kBeta1 * m + (1.0 - kBeta1) * gvec;
    v = kBeta2 * v + (1.0 - kBeta2) * gvec.cwiseProduct(gvec);
    const double step = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    const Eigen::VectorXd delta =
        step * m.cwiseQuotient((v.cwiseSqrt().array() + kEps * std::sqrt(1.0 - b2t)).matrix());
    Eigen::Map<Eigen::VectorXd>(p.w1.data(), 3 * n) -= delta.segment(0, 3 * n);
    p.alpha -= delta.segment(3 * n, n);
    p.w2 -= delta.segment(4 * n, n);
    p.clamp_output_weights();

    const double val_loss = detail::loss_and_gradient(p, validation, cfg.loss_kind, nullptr);
    result.epochs = epoch;
    if (!std::isfinite(val_loss)) {
      result.diverged = !std::isfinite(result.best_validation_loss);
      break;
    }
    if (val_loss < result.best_validation_loss) {
      result.best_validation_loss = val_loss;
      result.params = p;
      result.best_epoch = epoch;
      result.train_loss = train_loss;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

/// Trains cfg.restarts networks and keeps the one with the lowest validation
/// loss (ties resolved by restart index).
inline std::pair<NetworkParams, TrainingReport> train(std::span<const LabeledSample> data,
                                                      const TrainingConfig& cfg) {
  if (data.size() < 2) throw InvalidConfig("training needs at least two samples");
  if (!(cfg.split > 0.0 && cfg.split < 1.0)) throw InvalidConfig("split must lie in (0, 1)");
  if (cfg.max_epochs < 1 || cfg.patience < 1 || cfg.restarts < 1 || cfg.n_hidden < 1)
    throw InvalidConfig("training counts must be positive");

  std::vector<detail::PreparedSample> prepared;
  prepared.reserve(data.size());
  for (const LabeledSample& s : data) {
    if (cfg.loss_kind == LossKind::Energy && !s.energy) throw MissingTargets("sample lacks an energy label");
    if (cfg.loss_kind == LossKind::Stress && !s.stress) throw MissingTargets("sample lacks a stress label");
    prepared.push_back(detail::prepare(s));
  }

  TrainingReport report;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 split_rng(detail::mix_seed(cfg.seed, 0));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::size_t n_train = static_cast<std::size_t>(std::llround(cfg.split * static_cast<double>(data.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, data.size() - 1);
  report.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  report.validation_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  std::vector<detail::PreparedSample> train_set, val_set;
  for (std::size_t i : report.train_indices) train_set.push_back(prepared[i]);
  for (std::size_t i : report.validation_indices) val_set.push_back(prepared[i]);

  report.restarts.resize(static_cast<std::size_t>(cfg.restarts));
  auto run = [&](int r) {
    report.restarts[static_cast<std::size_t>(r)] =
        train_single(train_set, val_set, cfg, detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(r) + 1));
  };
  if (cfg.threads > 1) {
    for (int first = 0; first < cfg.restarts; first += cfg.threads) {
      std::vector<std::future<void>> jobs;
      for (int r = first; r < std::min(cfg.restarts, first + cfg.threads); ++r)
        jobs.push_back(std::async(std::launch::async, run, r));
      for (auto& j : jobs) j.get();
    }
  } else {
    for (int r = 0; r < cfg.restarts; ++r) run(r);
  }

  for (int r = 0; r < cfg.restarts; ++r) {
    const RestartResult& rr = report.restarts[static_cast<std::size_t>(r)];
    if (rr.diverged || !std::isfinite(rr.best_validation_loss)) continue;
    if (report.best_restart < 0 ||
        rr.best_validation_loss < report.restarts[static_cast<std::size_t>(report.best_restart)].best_validation_loss)
      report.best_restart = r;
  }
  if (report.best_restart < 0) throw AllRestartsDiverged("every training restart produced a non-finite loss");
  return {report.restarts[static_cast<std::size_t>(report.best_restart)].params, std::move(report)};
}

}  // namespace ddlab
