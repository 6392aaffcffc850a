#pragma once

// Log-barrier interior point for
//   min c'z  s.t.  E z = 0,  g_i(z) <= 0,
// where every g_i is either affine or a log-sum-exp of affine maps.

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "ebinv/core.hpp"

namespace ebinv::detail {

/// g(z) = log sum_r exp(rows_r . z + offsets_r); one row makes it affine.
struct LseConstraint {
  Eigen::MatrixXd rows;
  Eigen::VectorXd offsets;

  double value(const Eigen::VectorXd& z) const {
    const Eigen::VectorXd a = rows * z + offsets;
    if (a.size() == 1) return a[0];
    const double hi = a.maxCoeff();
    return hi + std::log((a.array() - hi).exp().sum());
  }

  // Adds the barrier -log(-g) gradient and Hessian; assumes g(z) < 0.
  void accumulate(const Eigen::VectorXd& z, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const Eigen::VectorXd a = rows * z + offsets;
    if (a.size() == 1) {
      const double g = a[0];
      const Eigen::VectorXd dg = rows.row(0).transpose();
      grad += dg / (-g);
      hess += dg * dg.transpose() / (g * g);
      return;
    }
    const double hi = a.maxCoeff();
    Eigen::VectorXd pi = (a.array() - hi).exp();
    const double sum = pi.sum();
    pi /= sum;
    const double g = hi + std::log(sum);
    const Eigen::VectorXd dg = rows.transpose() * pi;
    const Eigen::MatrixXd weighted = rows.transpose() * pi.asDiagonal() * rows;
    grad += dg / (-g);
    hess += dg * dg.transpose() / (g * g) + (weighted - dg * dg.transpose()) / (-g);
  }
};

struct BarrierProblem {
  Eigen::VectorXd cost;
  Eigen::MatrixXd equalities;  // rows of E; may be empty
  std::vector<LseConstraint> constraints;
};

struct BarrierResult {
  Eigen::VectorXd z;
  double duality_gap = 0.0;
  int newton_steps = 0;
  bool converged = false;
};

/// z0 must satisfy E z0 = 0 and g_i(z0) < 0 strictly.
inline BarrierResult solve_barrier(const BarrierProblem& prob, const Eigen::VectorXd& z0, double gap_tol = 1e-10,
                                   int max_newton = 5000) {
  const auto d = prob.cost.size();
  Eigen::MatrixXd null_basis;
  if (prob.equalities.rows() == 0) {
    null_basis = Eigen::MatrixXd::Identity(d, d);
  } else {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(prob.equalities.transpose());
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
    null_basis = q.rightCols(d - prob.equalities.rows());
  }

  auto feasible = [&](const Eigen::VectorXd& z) {
    for (const auto& c : prob.constraints)
      if (!(c.value(z) < 0.0)) return false;
    return true;
  };
  if (!feasible(z0)) throw NumericError("barrier start point is not strictly feasible");

  const auto m = static_cast<double>(prob.constraints.size());
  BarrierResult res{z0, m, 0, false};
  double t = 1.0;
  auto phi = [&](const Eigen::VectorXd& z) {
    double v = t * prob.cost.dot(z);
    for (const auto& c : prob.constraints) v -= std::log(-c.value(z));
    return v;
  };

  while (true) {
    for (int inner = 0; inner < 200; ++inner) {
      if (res.newton_steps >= max_newton) return res;
      Eigen::VectorXd grad = t * prob.cost;
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
      for (const auto& c : prob.constraints) c.accumulate(res.z, grad, hess);
      const Eigen::VectorXd gy = null_basis.transpose() * grad;
      const Eigen::MatrixXd hy = null_basis.transpose() * hess * null_basis;
      // Jacobi scaling keeps the factorisation accurate when curvature spans many decades.
      const Eigen::VectorXd scale = hy.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd hs = scale.asDiagonal() * hy * scale.asDiagonal();
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
      Eigen::VectorXd step = -(scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * gy));
      if (ldlt.info() != Eigen::Success || !step.allFinite() || !(gy.dot(step) < 0.0))
        step = -(scale.asDiagonal() * hs.completeOrthogonalDecomposition().solve(scale.asDiagonal() * gy));
      const double decrement = -gy.dot(step);
      ++res.newton_steps;
      if (!(decrement > 1e-20) || decrement / 2.0 < 1e-11) break;

      const Eigen::VectorXd dz = null_basis * step;
      const double base = phi(res.z);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls, alpha *= 0.5) {
        const Eigen::VectorXd trial = res.z + alpha * dz;
        if (!feasible(trial)) continue;
        if (phi(trial) <= base - 0.25 * alpha * decrement) {
          res.z = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    res.duality_gap = m / t;
    if (res.duality_gap <= gap_tol) {
      res.converged = true;
      return res;
    }
    t *= 10.0;
  }
}

}  // namespace ebinv::detail
