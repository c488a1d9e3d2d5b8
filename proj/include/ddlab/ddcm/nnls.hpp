#pragma once

// Lawson-Hanson active-set solver for min ||A x - b|| subject to x >= 0.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace ddlab {

inline Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(a.rows(), n));

  auto solve_passive = [&](Eigen::VectorXd& s) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) ap.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
    const Eigen::VectorXd sp = ap.colPivHouseholderQr().solve(b);
    s.setZero(n);
    for (std::size_t c = 0; c < cols.size(); ++c) s[cols[c]] = sp[static_cast<Eigen::Index>(c)];
  };

  Eigen::VectorXd s(n);
  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index t = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
        wmax = w[j];
        t = j;
      }
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = 1;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      solve_passive(s);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) feasible = false;
      if (feasible) {
        x = s;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0)
          alpha = std::min(alpha, x[j] - s[j] > 0.0 ? x[j] / (x[j] - s[j]) : 0.0);
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = 0;
          x[j] = 0.0;
        }
    }
  }
  return x.cwiseMax(0.0);
}

}  // namespace ddlab
