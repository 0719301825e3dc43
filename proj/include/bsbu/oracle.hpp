#pragma once

// Grid dynamic programming for the variable annuity: tabulates the truncated
// value function on a W grid per first-withdrawal label and evaluates every
// continuation by Gauss-Hermite quadrature with linear interpolation.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsbu/va_model.hpp"

namespace bsbu {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for integrals against exp(-u^2); weights sum to sqrt(pi).
/// Nodes from the Golub-Welsch eigenproblem, weights from the Christoffel sum
/// of orthonormal Hermite polynomials (stays positive deep in the tails).
inline QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw ValidationError("gauss_hermite: order must be >= 1");
  const Eigen::Index n = order;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) {
    const double b = std::sqrt(static_cast<double>(i) / 2.0);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi, Eigen::EigenvaluesOnly);
  QuadratureRule rule;
  rule.nodes.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + n);
  rule.weights.resize(rule.nodes.size());
  const double p0 = std::pow(std::numbers::pi, -0.25);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    double prev = 0.0;
    double cur = p0;
    double sum = cur * cur;
    for (int k = 0; k + 1 < order; ++k) {
      const double next = std::sqrt(2.0 / (k + 1)) * x * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
      prev = cur;
      cur = next;
      sum += cur * cur;
    }
    rule.weights[i] = 1.0 / sum;
    if (!(rule.weights[i] > 0.0) || !std::isfinite(rule.weights[i]))
      throw NumericError("gauss_hermite: weight " + std::to_string(i) + " at node " + std::to_string(x) +
                         " underflowed or overflowed");
  }
  return rule;
}

struct GridSpec {
  std::vector<double> w;             // sorted, from lo to hi inclusive
  std::vector<double> normal_nodes;  // standard-normal abscissae z
  std::vector<double> probabilities; // matching weights, summing to 1

  /// Uniform W grid with `points` nodes and a Gauss-Hermite rule of `order`.
  static GridSpec uniform(const TruncatedDomain& dom, int points, int order) {
    if (points < 2) throw ValidationError("GridSpec: need at least 2 grid points");
    GridSpec g;
    const double lo = dom.lo()[0];
    const double hi = dom.hi()[0];
    g.w.resize(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g.w[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    g.w.back() = hi;
    const QuadratureRule gh = gauss_hermite(order);
    for (std::size_t q = 0; q < gh.nodes.size(); ++q) {
      g.normal_nodes.push_back(std::numbers::sqrt2 * gh.nodes[q]);
      g.probabilities.push_back(gh.weights[q] / std::sqrt(std::numbers::pi));
    }
    return g;
  }

  void validate(const TruncatedDomain& dom) const {
    if (w.size() < 2) throw ValidationError("GridSpec: need at least 2 grid points");
    if (w.front() != dom.lo()[0] || w.back() != dom.hi()[0])
      throw ValidationError("GridSpec: grid must include both domain endpoints");
    for (std::size_t i = 1; i < w.size(); ++i)
      if (!(w[i] > w[i - 1])) throw ValidationError("GridSpec: grid must be strictly increasing");
    if (normal_nodes.size() != probabilities.size() || normal_nodes.empty())
      throw ValidationError("GridSpec: quadrature nodes and weights differ in length");
    double total = 0.0;
    for (double p : probabilities) {
      if (!(p > 0.0)) throw ValidationError("GridSpec: quadrature weights must be positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("GridSpec: quadrature weights must sum to 1");
  }
};

/// Tabulated V~_t(W, I) on the grid. Endpoint entries hold the one-sided
/// limits from the interior; the frozen boundary values are kept apart.
struct GridSolution {
  std::vector<double> w;
  // values[t][I][i], t = 0..T, I = 0..T-1.
  std::vector<std::vector<std::vector<double>>> values;
  // boundary[t][I] = {value at lo, value at hi}.
  std::vector<std::vector<std::array<double, 2>>> boundary;
  double v0 = 0.0;

  /// Linear interpolation of the interior table at w_query in [lo, hi].
  double interpolate(int t, int label, double w_query) const {
    const auto& row = values.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(label));
    if (w_query <= w.front()) return row.front();
    if (w_query >= w.back()) return row.back();
    const auto it = std::upper_bound(w.begin(), w.end(), w_query);
    const std::size_t j = static_cast<std::size_t>(it - w.begin());
    const double s = (w_query - w[j - 1]) / (w[j] - w[j - 1]);
    return (1.0 - s) * row[j - 1] + s * row[j];
  }
};

inline GridSolution grid_dp_solve(const VaModel& model, const TruncatedDomain& dom, const GridSpec& grid) {
  grid.validate(dom);
  if (dom.dims() != 1) throw ValidationError("grid_dp_solve: univariate domain required");
  const VaContract& c = model.contract();
  const int horizon = c.horizon;
  const double lo = dom.lo()[0];
  const double hi = dom.hi()[0];
  const double phi = model.discount();
  const LognormalInnovationSpec spec = c.innovation_spec();

  // Gross returns at the quadrature nodes; a single node when sigma = 0.
  std::vector<double> eps;
  std::vector<double> prob;
  if (spec.sigma == 0.0) {
    eps = {std::exp(spec.log_mean())};
    prob = {1.0};
  } else {
    for (std::size_t q = 0; q < grid.normal_nodes.size(); ++q) {
      const double e = std::exp(spec.log_mean() + spec.log_sd() * grid.normal_nodes[q]);
      if (!(e > 0.0) || !std::isfinite(e))
        throw NumericError("grid_dp_solve: innovation at node z=" + std::to_string(grid.normal_nodes[q]) +
                           " is " + std::to_string(e));
      eps.push_back(e);
      prob.push_back(grid.probabilities[q]);
    }
  }

  GridSolution sol;
  sol.w = grid.w;
  const std::size_t n = grid.w.size();
  const auto labels = static_cast<std::size_t>(horizon);
  sol.values.assign(static_cast<std::size_t>(horizon) + 1,
                    std::vector<std::vector<double>>(labels, std::vector<double>(n)));
  sol.boundary.assign(static_cast<std::size_t>(horizon) + 1, std::vector<std::array<double, 2>>(labels));
  for (int t = 0; t <= horizon; ++t)
    for (int i = 0; i < horizon; ++i)
      sol.boundary[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = {
          boundary_value(model, t, VaState{lo, i}.to_state()), boundary_value(model, t, VaState{hi, i}.to_state())};
  for (std::size_t i = 0; i < labels; ++i) sol.values[labels][i] = grid.w;  // f_T = W

  // V~_{t+1} at a point reached from the interior: boundary value once the
  // upper edge is hit, otherwise the interpolated interior table.
  auto next_value = [&](int t1, int label, double w_next) {
    if (w_next >= hi) return sol.boundary[static_cast<std::size_t>(t1)][static_cast<std::size_t>(label)][1];
    return sol.interpolate(t1, label, w_next);
  };
  auto continuation = [&](int t, double k1, int k2) {
    double total = 0.0;
    for (std::size_t q = 0; q < eps.size(); ++q) total += prob[q] * next_value(t + 1, k2, k1 * eps[q]);
    return total;
  };
  // Bellman maximum at an interior (or limiting endpoint) state.
  auto state_value = [&](int t, double w_now, int label) {
    const State x = VaState{w_now, label}.to_state();
    double best = -std::numeric_limits<double>::infinity();
    for (const Action& a : model.feasible_actions(t, x)) {
      const PostActionValue k = model.pre_action_map(t, x, a);
      const double gamma = a.continuous[0];
      const bool absorbed = k.continuous[0] <= lo && gamma > 0.0;
      const double cont = absorbed ? sol.boundary[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(k.discrete[0])][0]
                                   : continuation(t, k.continuous[0], k.discrete[0]);
      best = std::max(best, model.intermediate_reward(t, x, a) + phi * cont);
    }
    return best;
  };

  for (int t = horizon - 1; t >= 0; --t) {
    for (int label = 0; label < horizon; ++label) {
      auto& row = sol.values[static_cast<std::size_t>(t)][static_cast<std::size_t>(label)];
      for (std::size_t i = 0; i < n; ++i) {
        row[i] = state_value(t, grid.w[i], label);
        if (!std::isfinite(row[i]))
          throw NumericError("grid_dp_solve: non-finite value at t=" + std::to_string(t) + ", W=" +
                             std::to_string(grid.w[i]));
      }
    }
  }
  const VaState x0 = VaState::from(model.initial_state());
  sol.v0 = state_value(0, x0.account, x0.first_withdrawal);
  return sol;
}

struct EstimateComparison {
  double absolute_error = 0.0;
  double relative_error = 0.0;
};

inline EstimateComparison compare_estimates(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw ValidationError("compare_estimates: non-finite input");
  const double diff = std::abs(a - b);
  return {diff, diff / std::max(std::abs(b), 1e-12)};
}

}  // namespace bsbu
