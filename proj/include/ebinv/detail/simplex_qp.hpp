#pragma once

// Primal active-set solver for min ||M q - b||^2 subject to q >= 0, sum(q) = 1.

#include <Eigen/Dense>

#include <vector>

namespace ebinv::detail {

namespace simplex_qp_detail {

// Equality-constrained least squares on the free set: KKT system [G 1; 1' 0].
inline Eigen::VectorXd solve_free(const Eigen::MatrixXd& g, const Eigen::VectorXd& c, const std::vector<Eigen::Index>& free) {
  const auto k = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd rhs(k + 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) kkt(i, j) = g(free[i], free[j]);
    kkt(i, k) = 1.0;
    kkt(k, i) = 1.0;
    rhs[i] = c[free[i]];
  }
  rhs[k] = 1.0;
  return kkt.completeOrthogonalDecomposition().solve(rhs).head(k);
}

}  // namespace simplex_qp_detail

/// `start` must lie on the simplex; the result does too.
inline Eigen::VectorXd simplex_least_squares(const Eigen::MatrixXd& m, const Eigen::VectorXd& b, Eigen::VectorXd start) {
  const Eigen::Index n = m.cols();
  const Eigen::MatrixXd g = m.transpose() * m;
  const Eigen::VectorXd c = m.transpose() * b;
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  Eigen::VectorXd q = std::move(start);
  std::vector<bool> is_free(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) is_free[static_cast<std::size_t>(j)] = q[j] > 0.0;

  for (int iter = 0; iter < 20 * n + 100; ++iter) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index j = 0; j < n; ++j)
      if (is_free[static_cast<std::size_t>(j)]) free.push_back(j);
    const Eigen::VectorXd z = simplex_qp_detail::solve_free(g, c, free);

    bool feasible = true;
    for (std::size_t i = 0; i < free.size(); ++i)
      if (z[static_cast<Eigen::Index>(i)] < 0.0) feasible = false;

    if (!feasible) {
      double alpha = 1.0;
      for (std::size_t i = 0; i < free.size(); ++i) {
        const double zi = z[static_cast<Eigen::Index>(i)], qi = q[free[i]];
        if (zi < 0.0) alpha = std::min(alpha, qi / (qi - zi));
      }
      for (std::size_t i = 0; i < free.size(); ++i) {
        auto j = free[i];
        q[j] += alpha * (z[static_cast<Eigen::Index>(i)] - q[j]);
        if (q[j] <= 1e-15) {
          q[j] = 0.0;
          is_free[static_cast<std::size_t>(j)] = false;
        }
      }
      q /= q.sum();
      continue;
    }

    for (std::size_t i = 0; i < free.size(); ++i) q[free[i]] = z[static_cast<Eigen::Index>(i)];
    // Gradient of 0.5 ||M q - b||^2; on the free set it equals -nu.
    const Eigen::VectorXd grad = g * q - c;
    double nu = 0.0;
    for (auto j : free) nu += grad[j];
    nu /= static_cast<double>(free.size());
    Eigen::Index enter = -1;
    double most = -1e-12 * scale;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (is_free[static_cast<std::size_t>(j)]) continue;
      const double reduced = grad[j] - nu;
      if (reduced < most) {
        most = reduced;
        enter = j;
      }
    }
    if (enter < 0) break;
    is_free[static_cast<std::size_t>(enter)] = true;
  }
  return q;
}

}  // namespace ebinv::detail
