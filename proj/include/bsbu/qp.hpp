#pragma once

// Primal active-set method for
//     minimize  1/2 b^T Q b - c^T b   subject to  A b >= 0,
// with Q symmetric positive semidefinite. Every constraint is homogeneous, so
// b = 0 is always feasible and serves as the starting point.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "bsbu/common.hpp"

namespace bsbu {

struct QpOptions {
  double feasibility_tol = 1e-8;
  double kkt_tol = 1e-8;
  int max_iterations = 0;  // 0 -> 100 * n
};

struct QpResult {
  Eigen::VectorXd solution;
  Eigen::VectorXd multipliers;  // one per row of A
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Max-norm KKT residual: stationarity, primal and dual feasibility, and
/// complementary slackness, all in the units of the gradient Q b - c.
inline double qp_kkt_residual(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                              const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                              const Eigen::VectorXd& mu) {
  double res = (Q * b - c - A.transpose() * mu).cwiseAbs().maxCoeff();
  if (A.rows() > 0) {
    const Eigen::VectorXd slack = A * b;
    res = std::max(res, (-slack).cwiseMax(0.0).maxCoeff());
    res = std::max(res, (-mu).cwiseMax(0.0).maxCoeff());
    res = std::max(res, (slack.cwiseProduct(mu)).cwiseAbs().maxCoeff());
  }
  return res;
}

namespace detail {

// Orthonormal basis of the null space of the working-set rows.
inline Eigen::MatrixXd null_space(const Eigen::MatrixXd& rows, Eigen::Index n) {
  if (rows.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(rows.transpose());
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - rows.rows());
}

}  // namespace detail

inline QpResult solve_homogeneous_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                                     const Eigen::MatrixXd& A, const QpOptions& options = {}) {
  const Eigen::Index n = Q.rows();
  const Eigen::Index m = A.rows();
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : 100 * static_cast<int>(n);
  const double scale = std::max({1.0, Q.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff()});

  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  // At b = 0 every row is active. Start with a maximal independent subset.
  std::vector<Eigen::Index> working;
  {
    Eigen::MatrixXd acc(0, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::MatrixXd trial(acc.rows() + 1, n);
      trial << acc, A.row(i);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
      if (lu.rank() == trial.rows()) {
        acc = trial;
        working.push_back(i);
      }
    }
  }

  QpResult result;
  result.multipliers = Eigen::VectorXd::Zero(m);
  bool at_subspace_minimum = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    Eigen::MatrixXd aw(static_cast<Eigen::Index>(working.size()), n);
    for (std::size_t i = 0; i < working.size(); ++i)
      aw.row(static_cast<Eigen::Index>(i)) = A.row(working[i]);
    const Eigen::VectorXd grad = Q * b - c;

    if (!at_subspace_minimum) {
      const Eigen::MatrixXd z = detail::null_space(aw, n);
      Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
      if (z.cols() > 0) {
        const Eigen::VectorXd rhs = -(z.transpose() * grad);
        if (rhs.lpNorm<Eigen::Infinity>() > 1e-15 * scale) {
          const Eigen::MatrixXd reduced = z.transpose() * Q * z;
          Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
          const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
          const bool definite = ldlt.info() == Eigen::Success &&
                                ldlt.vectorD().minCoeff() > dmax * 1e-15 * static_cast<double>(reduced.rows());
          const Eigen::VectorXd y =
              definite ? Eigen::VectorXd(ldlt.solve(rhs))
                       : Eigen::VectorXd(Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(reduced).solve(rhs));
          p = z * y;
        }
      }
      if (p.lpNorm<Eigen::Infinity>() > 0.0) {
        // Ratio test against constraints outside the working set.
        double alpha = 1.0;
        Eigen::Index blocking = -1;
        const double p_norm = p.lpNorm<Eigen::Infinity>();
        for (Eigen::Index i = 0; i < m; ++i) {
          if (std::find(working.begin(), working.end(), i) != working.end()) continue;
          const double ap = A.row(i).dot(p);
          if (ap < -1e-15 * p_norm) {
            const double ratio = std::max(A.row(i).dot(b), 0.0) / -ap;
            if (ratio < alpha) {
              alpha = ratio;
              blocking = i;
            }
          }
        }
        b += alpha * p;
        if (blocking >= 0) {
          working.push_back(blocking);
        } else {
          at_subspace_minimum = true;
        }
        continue;
      }
    }

    // Minimizer on the working set: check multiplier signs.
    at_subspace_minimum = false;
    result.multipliers.setZero();
    if (working.empty()) break;
    const Eigen::VectorXd mu_w = aw.transpose().colPivHouseholderQr().solve(grad);
    Eigen::Index drop = -1;
    double most_negative = -1e-2 * options.kkt_tol;
    for (std::size_t i = 0; i < working.size(); ++i) {
      const double mu = mu_w(static_cast<Eigen::Index>(i));
      result.multipliers(working[i]) = mu;
      if (mu < most_negative) {
        most_negative = mu;
        drop = static_cast<Eigen::Index>(i);
      }
    }
    if (drop < 0) break;
    working.erase(working.begin() + drop);
  }

  result.solution = b;
  result.iterations = iter;
  result.kkt_residual = qp_kkt_residual(Q, c, A, b, result.multipliers);
  if (iter >= max_iter)
    throw SolverError("active-set QP did not converge in " + std::to_string(max_iter) +
                          " iterations (KKT residual " + std::to_string(result.kkt_residual) + ")",
                      result.kkt_residual);
  return result;
}

}  // namespace bsbu
