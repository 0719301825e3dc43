#pragma once

// The abstract discrete-time stochastic control problem. One-step dynamics are
// split into a deterministic pre-action map K(t, x, a) producing the post-action
// value and an innovation map H(t, k, eps) applying the randomness, so that
// S(x, a, eps) = H(K(x, a), eps).

#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "bsbu/common.hpp"
#include "bsbu/random.hpp"

namespace bsbu {

inline constexpr std::size_t kMaxDims = 4;
inline constexpr std::size_t kMaxActions = 8;

using RealVec = SmallVec<double, kMaxDims>;
using LabelVec = SmallVec<int, kMaxDims>;

/// Hybrid vector: a real part in problem units plus integer labels.
struct HybridPoint {
  RealVec continuous;
  LabelVec discrete;

  friend bool operator==(const HybridPoint&, const HybridPoint&) = default;
};

struct State : HybridPoint {};
struct Action : HybridPoint {};
struct PostActionValue : HybridPoint {};

using Innovation = RealVec;
using ActionList = SmallVec<Action, kMaxActions>;

inline State make_state(RealVec c, LabelVec d) { return State{{c, d}}; }
inline Action make_action(RealVec c, LabelVec d) { return Action{{c, d}}; }
inline PostActionValue make_post_action(RealVec c, LabelVec d) { return PostActionValue{{c, d}}; }

/// Immutable problem description. Implementations must be safe to share
/// between threads; every member is a pure function of its arguments.
///
/// Preconditions the solvers rely on but cannot check: the reward moment
/// conditions hold for every admissible policy, and feasible_actions(t, x) is
/// non-empty and deterministic in its ordering (argmax ties resolve to the
/// earliest action).
class ControlModel {
 public:
  virtual ~ControlModel() = default;

  virtual int horizon() const = 0;
  virtual double discount() const = 0;
  virtual State initial_state() const = 0;

  virtual PostActionValue pre_action_map(int t, const State& x, const Action& a) const = 0;
  virtual State innovation_map(int t, const PostActionValue& k, const Innovation& e) const = 0;
  virtual ActionList feasible_actions(int t, const State& x) const = 0;
  virtual double intermediate_reward(int t, const State& x, const Action& a) const = 0;
  virtual double terminal_reward(const State& x) const = 0;

  /// Draws eps_{t+1} from the innovation law.
  virtual Innovation draw_innovation(int t, RandomGenerator& gen) const = 0;
  /// An innovation value e with H(k, e) = k; used to locate absorbed points.
  virtual Innovation neutral_innovation() const = 0;

  /// Optional monolithic transition S(x, a, eps) for cross-checking K/H.
  virtual std::optional<State> monolithic_transition(int, const State&, const Action&,
                                                     const Innovation&) const {
    return std::nullopt;
  }

  bool is_feasible(int t, const State& x, const Action& a) const {
    for (const Action& candidate : feasible_actions(t, x))
      if (candidate == a) return true;
    return false;
  }
};

inline void validate_finite(const HybridPoint& p, const char* what) {
  if (!all_finite(p.continuous.span()))
    throw ValidationError(std::string(what) + " has non-finite continuous components");
}

/// H(t, K(t, x, a), eps), i.e. the one-step transition S(x, a, eps).
inline State compose_transition(const ControlModel& model, int t, const State& x,
                                const Action& a, const Innovation& eps) {
  validate_finite(x, "state");
  validate_finite(a, "action");
  if (!all_finite(eps.span())) throw ValidationError("innovation has non-finite components");
  if (t < 0 || t >= model.horizon())
    throw DomainError("compose_transition: step " + std::to_string(t) + " outside [0, T-1]");
  if (!model.is_feasible(t, x, a))
    throw DomainError("compose_transition: action infeasible at t=" + std::to_string(t) +
                      " (not a member of A_t(x))");
  return model.innovation_map(t, model.pre_action_map(t, x, a), eps);
}

struct PathStep {
  int t;
  State state;
  Action action;
};

/// sum_t phi^t f_t(x_t, a_t) + phi^T f_T(x_T).
inline double discounted_path_reward(const ControlModel& model, std::span<const PathStep> path,
                                     const State& terminal_state) {
  const int horizon = model.horizon();
  if (static_cast<int>(path.size()) != horizon)
    throw ValidationError("discounted_path_reward: path has " + std::to_string(path.size()) +
                          " steps, horizon is " + std::to_string(horizon));
  const double phi = model.discount();
  double total = 0.0;
  double factor = 1.0;
  for (int t = 0; t < horizon; ++t) {
    const PathStep& step = path[static_cast<std::size_t>(t)];
    if (step.t != t) throw ValidationError("discounted_path_reward: path steps out of order");
    if (!model.is_feasible(t, step.state, step.action))
      throw ContractError("discounted_path_reward: infeasible action at t=" + std::to_string(t));
    total += factor * model.intermediate_reward(t, step.state, step.action);
    factor *= phi;
  }
  return total + std::pow(phi, horizon) * model.terminal_reward(terminal_state);
}

}  // namespace bsbu
