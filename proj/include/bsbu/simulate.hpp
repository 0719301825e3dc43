#pragma once

// Sampling front-ends for the two engines: artificial post-action samples for
// backward simulation, and control-randomized forward paths for the baseline.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bsbu/distributions.hpp"
#include "bsbu/model.hpp"
#include "bsbu/truncation.hpp"

namespace bsbu {

/// k1 ~ U(lo, hi) on the open interval, k2 ~ U{0, ..., t}, independent.
inline std::vector<PostActionValue> sample_post_actions(int t, double lo, double hi, std::size_t count,
                                                        const RandomStream& stream) {
  if (t < 0) throw ValidationError("sample_post_actions: t must be >= 0");
  if (count == 0) throw ValidationError("sample_post_actions: M must be >= 1");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ValidationError("sample_post_actions: need finite lo < hi");
  std::vector<PostActionValue> out;
  out.reserve(count);
  RandomGenerator gen = stream.generator();
  const auto labels = static_cast<std::uint64_t>(t) + 1;
  for (std::size_t m = 0; m < count; ++m) {
    double k1 = lo + (hi - lo) * gen.uniform_open();
    // Rounding can land on an endpoint when the interval is far from 0.
    if (!(k1 > lo && k1 < hi)) k1 = 0.5 * (lo + hi);
    const int k2 = static_cast<int>(gen.uniform_index(labels));
    out.push_back(make_post_action({k1}, {k2}));
  }
  return out;
}

inline std::vector<PostActionValue> sample_post_actions(int t, double truncation, std::size_t count,
                                                        const RandomStream& stream) {
  if (!(truncation > 0.0)) throw ValidationError("sample_post_actions: R must be > 0");
  return sample_post_actions(t, 0.0, truncation, count, stream);
}

/// Artificial distribution for post-action values at step t.
class PostActionSampler {
 public:
  virtual ~PostActionSampler() = default;
  virtual std::vector<PostActionValue> sample(int t, std::size_t count, const RandomStream& stream) const = 0;
};

/// Uniform over the open box of the domain times the labels {0, ..., t}.
class UniformPostActionSampler final : public PostActionSampler {
 public:
  explicit UniformPostActionSampler(TruncatedDomain dom) : dom_(std::move(dom)) {
    if (dom_.dims() != 1) throw ValidationError("UniformPostActionSampler: univariate domain required");
  }
  std::vector<PostActionValue> sample(int t, std::size_t count, const RandomStream& stream) const override {
    return sample_post_actions(t, dom_.lo()[0], dom_.hi()[0], count, stream);
  }

 private:
  TruncatedDomain dom_;
};

// ---------------------------------------------------------------------------
// Control randomization.

enum class CrRule { CR0, CR1, CR2 };

inline const char* to_string(CrRule rule) {
  switch (rule) {
    case CrRule::CR0: return "cr0";
    case CrRule::CR1: return "cr1";
    case CrRule::CR2: return "cr2";
  }
  return "unknown";
}

inline CrRule parse_cr_rule(const std::string& name) {
  for (CrRule r : {CrRule::CR0, CrRule::CR1, CrRule::CR2})
    if (name == to_string(r)) return r;
  throw ValidationError("unknown control randomization rule '" + name + "'");
}

/// Draws an action from the rule. Assumes the bang-bang ordering
/// [hold, guaranteed, surrender] with duplicates removed.
///   CR0: always the guaranteed withdrawal.
///   CR1: uniform over the feasible set.
///   CR2: uniform over {hold, guaranteed}.
inline Action draw_cr_action(CrRule rule, const ActionList& actions, RandomGenerator& gen) {
  if (actions.size() == 0) throw ContractError("draw_cr_action: empty feasible set");
  if (actions.size() == 1) return actions[0];
  switch (rule) {
    case CrRule::CR0: return actions[1];
    case CrRule::CR1: return actions[static_cast<std::size_t>(gen.uniform_index(actions.size()))];
    case CrRule::CR2: return actions[static_cast<std::size_t>(gen.uniform_index(2))];
  }
  throw ContractError("draw_cr_action: unknown rule");
}

struct ForwardSample {
  std::vector<State> current;                // X_t per path
  std::vector<PostActionValue> post_actions;  // K(X_t, a_t)
  std::vector<State> next;                   // X_{t+1} = H~(K, eps), or X_t if frozen
  std::vector<std::vector<State>> paths;     // X_1..X_{t+1} when requested
};

/// M auxiliary-process paths from X_0 up to step t + 1 with actions drawn by
/// the rule. Boundary states stay frozen.
inline ForwardSample forward_simulate(const ControlModel& model, const TruncatedDomain& dom, CrRule rule, int t,
                                      std::size_t count, const RandomStream& stream, bool keep_paths = false) {
  if (t < 0 || t >= model.horizon()) throw ValidationError("forward_simulate: t outside [0, T-1]");
  if (count == 0) throw ValidationError("forward_simulate: M must be >= 1");
  ForwardSample out;
  out.current.reserve(count);
  out.post_actions.reserve(count);
  out.next.reserve(count);
  if (keep_paths) out.paths.resize(count);
  RandomGenerator gen = stream.generator();
  const State start = model.initial_state();
  for (std::size_t m = 0; m < count; ++m) {
    State x = start;
    if (keep_paths) out.paths[m].reserve(static_cast<std::size_t>(t) + 1);
    for (int s = 0; s <= t; ++s) {
      const ActionList actions = model.feasible_actions(s, x);
      const Action a = draw_cr_action(rule, actions, gen);
      if (!model.is_feasible(s, x, a))
        throw ContractError("forward_simulate: rule drew an infeasible action at t=" + std::to_string(s));
      const Innovation eps = model.draw_innovation(s, gen);
      const bool frozen = dom.on_boundary(x.continuous);
      if (s == t) {
        out.current.push_back(x);
        out.post_actions.push_back(model.pre_action_map(s, x, a));
      }
      x = frozen ? x : truncated_step(model, dom, s, model.pre_action_map(s, x, a), eps);
      if (keep_paths) out.paths[m].push_back(x);
    }
    out.next.push_back(x);
  }
  return out;
}

}  // namespace bsbu
