#pragma once

// Bernstein sieve regression. The raw estimate is ordinary least squares on
// the Bernstein span; the shape-preserving estimate adds the linear
// inequalities A_J beta >= 0 and is computed by the active-set QP.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsbu/bernstein.hpp"
#include "bsbu/qp.hpp"

namespace bsbu {

struct RegressionSample {
  std::vector<double> responses;   // U
  std::vector<double> regressors;  // Z

  std::size_t size() const { return responses.size(); }
  void add(double z, double u) {
    regressors.push_back(z);
    responses.push_back(u);
  }
  void validate(const BernsteinBasis& basis) const {
    if (responses.size() != regressors.size())
      throw ValidationError("RegressionSample: responses and regressors differ in length");
    if (responses.empty()) throw ValidationError("RegressionSample: empty sample");
    for (std::size_t m = 0; m < regressors.size(); ++m) {
      if (!std::isfinite(responses[m]) || !std::isfinite(regressors[m]))
        throw ValidationError("RegressionSample: non-finite entry at index " + std::to_string(m));
      if (!basis.contains(regressors[m]))
        throw RangeError("RegressionSample: regressor " + std::to_string(regressors[m]) +
                         " outside the basis domain");
    }
  }
};

struct SieveDiagnostics {
  std::size_t sample_size = 0;
  double ssr = 0.0;  // sum of squared residuals
  double kkt_residual = 0.0;
  int qp_iterations = 0;
  bool rank_deficient = false;
  bool degenerate = false;          // all regressors identical
  bool underdetermined = false;     // fewer points than coefficients
};

class FittedSieve {
 public:
  FittedSieve(BernsteinBasis basis, std::vector<double> coefficients, ShapeConstraint constraint,
              SieveDiagnostics diagnostics = {})
      : basis_(std::move(basis)),
        coefficients_(std::move(coefficients)),
        constraint_(constraint),
        diagnostics_(diagnostics) {
    if (coefficients_.size() != basis_.size())
      throw ValidationError("FittedSieve: coefficient count does not match basis order");
    if (!all_finite(coefficients_)) throw NumericError("FittedSieve: non-finite coefficients");
  }

  const BernsteinBasis& basis() const { return basis_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  ShapeConstraint constraint() const { return constraint_; }
  const SieveDiagnostics& diagnostics() const { return diagnostics_; }

  /// beta^T phi(z). Throws RangeError outside the basis domain.
  double predict(double z) const {
    if (!basis_.contains(z))
      throw RangeError("sieve_predict: z=" + std::to_string(z) + " outside the fitted domain");
    const std::size_t n = coefficients_.size();
    double scratch[64];
    std::vector<double> heap;
    double* phi = scratch;
    if (n > 64) {
      heap.resize(n);
      phi = heap.data();
    }
    basis_.evaluate(z, std::span<double>(phi, n));
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += coefficients_[j] * phi[j];
    return total;
  }

 private:
  BernsteinBasis basis_;
  std::vector<double> coefficients_;
  ShapeConstraint constraint_;
  SieveDiagnostics diagnostics_;
};

inline double sieve_predict(const FittedSieve& fit, double z) { return fit.predict(z); }

struct SieveOptions {
  double feasibility_tol = 1e-8;
  double kkt_tol = 1e-8;
};

namespace detail {

inline std::size_t distinct_count_up_to(std::span<const double> values, std::size_t cap) {
  std::vector<double> seen;
  seen.reserve(cap);
  for (double v : values) {
    if (std::find(seen.begin(), seen.end(), v) == seen.end()) {
      seen.push_back(v);
      if (seen.size() >= cap) break;
    }
  }
  return seen.size();
}

// Least-norm solution of Q b = c through the eigendecomposition, keeping the
// `rank` largest eigenvalues.
inline Eigen::VectorXd least_norm_solve(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                                        Eigen::Index rank) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q);
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(Q.rows());
  const Eigen::Index n = Q.rows();
  for (Eigen::Index i = n - rank; i < n; ++i) {
    if (values(i) <= 0.0) continue;
    b += vectors.col(i) * (vectors.col(i).dot(c) / values(i));
  }
  return b;
}

inline Eigen::MatrixXd design_matrix(const RegressionSample& sample, const BernsteinBasis& basis) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x(
      static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t m = 0; m < sample.size(); ++m)
    basis.evaluate(sample.regressors[m], std::span<double>(x.row(static_cast<Eigen::Index>(m)).data(), basis.size()));
  return x;
}

}  // namespace detail

/// Constraint rows used when fitting at order J. Orders too small to carry a
/// row for the requested shape are unconstrained (a constant or a line is
/// already monotone and convex).
inline Eigen::MatrixXd fitting_constraint_rows(ShapeConstraint kind, int order) {
  if (kind == ShapeConstraint::ConvexMonotone && order == 1)
    return detail::constraint_rows(ShapeConstraint::Monotone, 1);
  if (order < min_order_for(kind)) return Eigen::MatrixXd(0, order + 1);
  return detail::constraint_rows(kind, order);
}

/// Least squares on the Bernstein span subject to the shape constraint.
inline FittedSieve fit_sieve(const RegressionSample& sample, const BernsteinBasis& basis,
                             ShapeConstraint constraint, const SieveOptions& options = {}) {
  sample.validate(basis);
  const std::size_t count = sample.size();
  const auto n = static_cast<Eigen::Index>(basis.size());
  const double inv_m = 1.0 / static_cast<double>(count);

  SieveDiagnostics diag;
  diag.sample_size = count;
  diag.underdetermined = count < basis.size();

  const std::size_t distinct = detail::distinct_count_up_to(sample.regressors, basis.size());
  std::vector<double> beta(basis.size());
  if (distinct == 1) {
    const double mean =
        std::accumulate(sample.responses.begin(), sample.responses.end(), 0.0) * inv_m;
    std::fill(beta.begin(), beta.end(), mean);
    diag.degenerate = true;
    diag.rank_deficient = basis.size() > 1;
  } else {
    // Normal equations (1/M) X^T X b = (1/M) X^T U.
    const Eigen::MatrixXd design = detail::design_matrix(sample, basis);
    const Eigen::Map<const Eigen::VectorXd> u(sample.responses.data(), static_cast<Eigen::Index>(count));
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), inv_m);
    gram = gram.selfadjointView<Eigen::Lower>();
    const Eigen::VectorXd rhs = design.transpose() * u * inv_m;

    const bool full_rank = distinct >= basis.size();
    diag.rank_deficient = !full_rank;
    const Eigen::MatrixXd rows = fitting_constraint_rows(constraint, basis.order());

    Eigen::VectorXd b;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(rows.rows());
    if (full_rank) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      b = ldlt.solve(rhs);
      if (ldlt.info() != Eigen::Success || !b.allFinite())
        b = detail::least_norm_solve(gram, rhs, n);
    } else {
      b = detail::least_norm_solve(gram, rhs, static_cast<Eigen::Index>(distinct));
    }

    const bool needs_qp = rows.rows() > 0 && (rows * b).minCoeff() < 0.0;
    if (needs_qp) {
      QpOptions qp_options;
      qp_options.feasibility_tol = options.feasibility_tol;
      qp_options.kkt_tol = options.kkt_tol;
      qp_options.max_iterations = 100 * static_cast<int>(n);
      const QpResult qp = solve_homogeneous_qp(gram, rhs, rows, qp_options);
      b = qp.solution;
      mu = qp.multipliers;
      diag.qp_iterations = qp.iterations;
    }
    diag.kkt_residual = qp_kkt_residual(gram, rhs, rows, b, mu);
    if (needs_qp && diag.kkt_residual > options.kkt_tol)
      throw SolverError("fit_sieve: KKT residual " + std::to_string(diag.kkt_residual) +
                            " exceeds tolerance",
                        diag.kkt_residual);
    for (Eigen::Index i = 0; i < n; ++i) beta[static_cast<std::size_t>(i)] = b(i);
  }

  // SSR from a fresh pass over the data, not from the Gram moments.
  double ssr = 0.0;
  std::vector<double> phi(basis.size());
  for (std::size_t m = 0; m < count; ++m) {
    basis.evaluate(sample.regressors[m], phi);
    double fitted = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) fitted += beta[j] * phi[j];
    const double r = sample.responses[m] - fitted;
    ssr += r * r;
  }
  diag.ssr = ssr;
  return FittedSieve(basis, std::move(beta), constraint, diag);
}

// ---------------------------------------------------------------------------
// Data-driven choice of J.

enum class SelectionCriterion { MallowsCp, GCV, LOOCV };

inline const char* to_string(SelectionCriterion c) {
  switch (c) {
    case SelectionCriterion::MallowsCp: return "mallows-cp";
    case SelectionCriterion::GCV: return "gcv";
    case SelectionCriterion::LOOCV: return "loocv";
  }
  return "unknown";
}

inline SelectionCriterion parse_selection_criterion(const std::string& name) {
  for (SelectionCriterion c : {SelectionCriterion::MallowsCp, SelectionCriterion::GCV, SelectionCriterion::LOOCV})
    if (name == to_string(c)) return c;
  throw ValidationError("unknown selection criterion '" + name + "'");
}

/// SSR/M + 2 sigma^2 J/M with sigma^2 = SSR/M.
inline double mallows_cp(double ssr, std::size_t count, int order) {
  const double m = static_cast<double>(count);
  const double mse = ssr / m;
  return mse + 2.0 * mse * (order / m);
}

/// (SSR/M) / (1 - J/M)^2; nullopt when J/M >= 1.
inline std::optional<double> generalized_cv(double ssr, std::size_t count, int order) {
  const double m = static_cast<double>(count);
  const double ratio = order / m;
  if (ratio >= 1.0) return std::nullopt;
  return (ssr / m) / ((1.0 - ratio) * (1.0 - ratio));
}

/// Leave-one-out CV score. Unconstrained fits use the hat-matrix identity
/// r_m / (1 - h_mm); constrained fits are refitted M times.
inline double leave_one_out_cv(const RegressionSample& sample, const BernsteinBasis& basis,
                               ShapeConstraint constraint, const SieveOptions& options = {}) {
  const std::size_t count = sample.size();
  if (count < 2) throw ValidationError("leave_one_out_cv: need at least two points");
  double total = 0.0;
  if (constraint == ShapeConstraint::None &&
      detail::distinct_count_up_to(sample.regressors, basis.size() + 1) > basis.size()) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(count), n);
    std::vector<double> phi(basis.size());
    for (std::size_t m = 0; m < count; ++m) {
      basis.evaluate(sample.regressors[m], phi);
      for (Eigen::Index j = 0; j < n; ++j) x(static_cast<Eigen::Index>(m), j) = phi[static_cast<std::size_t>(j)];
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(count), n);
    const Eigen::Map<const Eigen::VectorXd> u(sample.responses.data(), static_cast<Eigen::Index>(count));
    const Eigen::VectorXd fitted = q * (q.transpose() * u);
    for (std::size_t m = 0; m < count; ++m) {
      const auto i = static_cast<Eigen::Index>(m);
      const double leverage = q.row(i).squaredNorm();
      const double r = (u(i) - fitted(i)) / (1.0 - leverage);
      total += r * r;
    }
    return total / static_cast<double>(count);
  }
  RegressionSample reduced;
  reduced.responses.reserve(count - 1);
  reduced.regressors.reserve(count - 1);
  for (std::size_t left_out = 0; left_out < count; ++left_out) {
    reduced.responses.clear();
    reduced.regressors.clear();
    for (std::size_t m = 0; m < count; ++m)
      if (m != left_out) reduced.add(sample.regressors[m], sample.responses[m]);
    const FittedSieve fit = fit_sieve(reduced, basis, constraint, options);
    const double r = sample.responses[left_out] - fit.predict(sample.regressors[left_out]);
    total += r * r;
  }
  return total / static_cast<double>(count);
}

struct SelectionResult {
  int order = 0;
  std::vector<std::pair<int, double>> scores;  // evaluated candidates
  std::vector<int> skipped;
};

/// Picks J minimizing the criterion; near-ties (within 1e-12 of the mean
/// squared response) go to the smallest J.
inline SelectionResult select_basis_count_detailed(const RegressionSample& sample, double lo, double hi,
                                                   std::vector<int> candidates, SelectionCriterion criterion,
                                                   ShapeConstraint constraint, const SieveOptions& options = {}) {
  if (candidates.empty()) throw ValidationError("select_basis_count: no candidates");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  SelectionResult out;
  for (int order : candidates) {
    if (order < 0) throw ValidationError("select_basis_count: negative candidate");
    const BernsteinBasis basis(order, lo, hi);
    std::optional<double> score;
    switch (criterion) {
      case SelectionCriterion::MallowsCp: {
        const FittedSieve fit = fit_sieve(sample, basis, constraint, options);
        score = mallows_cp(fit.diagnostics().ssr, sample.size(), order);
        break;
      }
      case SelectionCriterion::GCV: {
        if (static_cast<double>(order) / static_cast<double>(sample.size()) >= 1.0) break;
        const FittedSieve fit = fit_sieve(sample, basis, constraint, options);
        score = generalized_cv(fit.diagnostics().ssr, sample.size(), order);
        break;
      }
      case SelectionCriterion::LOOCV:
        score = leave_one_out_cv(sample, basis, constraint, options);
        break;
    }
    if (score) {
      out.scores.emplace_back(order, *score);
    } else {
      out.skipped.push_back(order);
    }
  }
  if (out.scores.empty()) throw ValidationError("select_basis_count: every candidate was skipped");
  double best = out.scores.front().second;
  for (const auto& [order, score] : out.scores) best = std::min(best, score);
  double scale = 0.0;
  for (double u : sample.responses) scale += u * u;
  scale /= static_cast<double>(sample.size());
  const double tie = 1e-12 * std::max(scale, 1e-300);
  for (const auto& [order, score] : out.scores) {
    if (score <= best + tie) {
      out.order = order;
      break;
    }
  }
  return out;
}

inline int select_basis_count(const RegressionSample& sample, double lo, double hi,
                              const std::vector<int>& candidates, SelectionCriterion criterion,
                              ShapeConstraint constraint) {
  return select_basis_count_detailed(sample, lo, hi, candidates, criterion, constraint).order;
}

}  // namespace bsbu
