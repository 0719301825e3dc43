#pragma once

// Truncated auxiliary state process: the continuous part of the state lives in
// a closed box; a transition that leaves the open interior is projected onto
// the boundary, and boundary states stay frozen until maturity.

#include <cmath>
#include <string>

#include "bsbu/model.hpp"

namespace bsbu {

/// Box [lo_i, hi_i] over the continuous coordinates. Discrete labels pass
/// through untouched.
class TruncatedDomain {
 public:
  TruncatedDomain(RealVec lo, RealVec hi) : lo_(lo), hi_(hi) {
    if (lo_.size() != hi_.size() || lo_.empty())
      throw ValidationError("TruncatedDomain: bound vectors must be non-empty and of equal length");
    for (std::size_t i = 0; i < lo_.size(); ++i)
      if (!(lo_[i] < hi_[i]) || !std::isfinite(lo_[i]) || !std::isfinite(hi_[i]))
        throw ValidationError("TruncatedDomain: require finite lo < hi in coordinate " +
                              std::to_string(i));
  }

  /// Scalar box [lo, hi].
  static TruncatedDomain interval(double lo, double hi) { return {RealVec{lo}, RealVec{hi}}; }

  const RealVec& lo() const { return lo_; }
  const RealVec& hi() const { return hi_; }
  std::size_t dims() const { return lo_.size(); }

  bool in_closure(const RealVec& c) const {
    check_dims(c);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (!(c[i] >= lo_[i] && c[i] <= hi_[i])) return false;
    return true;
  }
  bool in_interior(const RealVec& c) const {
    check_dims(c);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (!(c[i] > lo_[i] && c[i] < hi_[i])) return false;
    return true;
  }
  bool on_boundary(const RealVec& c) const { return in_closure(c) && !in_interior(c); }

 private:
  void check_dims(const RealVec& c) const {
    if (c.size() != lo_.size())
      throw ValidationError("TruncatedDomain: point has " + std::to_string(c.size()) +
                            " continuous coordinates, domain has " + std::to_string(lo_.size()));
  }

  RealVec lo_;
  RealVec hi_;
};

/// Euclidean projection onto the closed box (componentwise clamp).
template <class Point>
Point project_to_closure(const Point& x, const TruncatedDomain& dom) {
  if (x.continuous.size() != dom.dims())
    throw ValidationError("project_to_closure: dimension mismatch");
  Point out = x;
  for (std::size_t i = 0; i < dom.dims(); ++i)
    out.continuous[i] = std::clamp(x.continuous[i], dom.lo()[i], dom.hi()[i]);
  return out;
}

/// H~(k, eps): H(k, eps) if it lands in the interior, else its projection.
inline State truncated_step(const ControlModel& model, const TruncatedDomain& dom, int t,
                            const PostActionValue& k, const Innovation& eps) {
  State next = model.innovation_map(t, k, eps);
  validate_finite(next, "innovation_map result");
  if (dom.in_interior(next.continuous)) return next;
  return project_to_closure(next, dom);
}

/// One step of the auxiliary process: boundary states are frozen.
inline State auxiliary_step(const ControlModel& model, const TruncatedDomain& dom, int t,
                            const State& x, const Action& a, const Innovation& eps) {
  if (dom.on_boundary(x.continuous)) return x;
  return truncated_step(model, dom, t, model.pre_action_map(t, x, a), eps);
}

/// Value of a frozen boundary state: the greedy immediate reward collected at
/// every remaining step plus the discounted terminal reward. Ties in the
/// greedy choice go to the earliest action.
inline double boundary_value(const ControlModel& model, int t, const State& x) {
  const int horizon = model.horizon();
  if (t < 0 || t > horizon) throw DomainError("boundary_value: step out of range");
  const double phi = model.discount();
  double total = 0.0;
  double factor = 1.0;
  for (int n = t; n < horizon; ++n) {
    const ActionList actions = model.feasible_actions(n, x);
    if (actions.empty())
      throw ConfigurationError("boundary_value: empty feasible set at t=" + std::to_string(n));
    double best = model.intermediate_reward(n, x, actions[0]);
    for (std::size_t i = 1; i < actions.size(); ++i)
      best = std::max(best, model.intermediate_reward(n, x, actions[i]));
    total += factor * best;
    factor *= phi;
  }
  return total + factor * model.terminal_reward(x);
}

/// True when k lies in the absorbing set: some continuous coordinate sits on
/// the box boundary, so the next state is the frozen boundary point.
inline bool is_absorbing(const PostActionValue& k, const TruncatedDomain& dom) {
  return dom.on_boundary(k.continuous);
}

/// Continuation value for an absorbing post-action value; independent of the
/// innovation, so it reduces to a boundary value at t+1.
inline double absorbing_continuation(const ControlModel& model, const TruncatedDomain& dom,
                                     int t, const PostActionValue& k) {
  if (!is_absorbing(k, dom))
    throw ContractError("absorbing_continuation: post-action value at t=" + std::to_string(t) +
                        " is not in the absorbing set");
  const State landed = project_to_closure(model.innovation_map(t, k, model.neutral_innovation()), dom);
  if (!dom.on_boundary(landed.continuous))
    throw ContractError("absorbing_continuation: H(k, e) left the boundary");
  return boundary_value(model, t + 1, landed);
}

struct TruncationBound {
  int horizon = 0;
  double reward_bound = 0.0;    // xi(R)
  double moment_bound = 0.0;    // zeta
  double exit_probability = 0.0;
};

/// T * sqrt(2 (xi + zeta) E): bound on |V_0 - V~_0| from truncating the domain.
inline double truncation_error_bound(const TruncationBound& b) {
  if (b.horizon < 0 || !(b.reward_bound >= 0.0) || !(b.moment_bound >= 0.0) ||
      !(b.exit_probability >= 0.0) || !(b.exit_probability <= 1.0))
    throw ValidationError(
        "truncation_error_bound: need T, xi, zeta >= 0 and exit probability in [0, 1]");
  return b.horizon * std::sqrt(2.0 * (b.reward_bound + b.moment_bound) * b.exit_probability);
}

}  // namespace bsbu
