#pragma once

// Variable annuity with guaranteed withdrawals. State x = (W, I): account
// value and first-withdrawal time (0 = not yet initiated). Action a = (gamma,
// tau): withdrawal amount and initiation flag. Actions are restricted to the
// bang-bang set {hold, guaranteed amount, full surrender}.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bsbu/distributions.hpp"
#include "bsbu/model.hpp"
#include "bsbu/truncation.hpp"

namespace bsbu {

/// Guarantee schedule: 3% for I <= 3, 5% for 4 <= I <= 7, 7% beyond.
inline std::vector<double> default_guarantee_schedule(int horizon) {
  std::vector<double> g(static_cast<std::size_t>(std::max(horizon, 1)));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = i <= 3 ? 0.03 : (i <= 7 ? 0.05 : 0.07);
  return g;
}

struct VaContract {
  int horizon = 12;
  double delta = 1.0 / 12.0;
  double r = 0.03;
  double q = 0.01;
  double sigma = 0.15;
  double initial_premium = 1.0;  // W0
  double guarantee_base = 1.0;   // P0
  double penalty = 0.8;          // kappa
  std::vector<double> guarantee = default_guarantee_schedule(12);
  /// Per-step discount factor; exp(-r delta) when unset.
  std::optional<double> discount_override;

  double discount() const { return discount_override.value_or(std::exp(-r * delta)); }
  LognormalInnovationSpec innovation_spec() const { return {r, q, sigma, delta}; }

  /// Table defaults with the horizon changed and the schedule cut to match.
  static VaContract with_horizon(int horizon) {
    VaContract c;
    c.horizon = horizon;
    c.guarantee = default_guarantee_schedule(horizon);
    return c;
  }

  void validate() const {
    if (horizon < 1) throw ValidationError("VaContract: horizon must be >= 1");
    if (!(delta > 0.0)) throw ValidationError("VaContract: delta must be > 0");
    for (double v : {r, q, sigma, initial_premium, guarantee_base, penalty})
      if (!std::isfinite(v)) throw ValidationError("VaContract: non-finite parameter");
    if (sigma < 0.0) throw ValidationError("VaContract: sigma must be >= 0");
    if (penalty < 0.0 || penalty > 1.0) throw ValidationError("VaContract: kappa must lie in [0, 1]");
    if (!(initial_premium > 0.0)) throw ValidationError("VaContract: W0 must be > 0");
    if (guarantee_base < 0.0) throw ValidationError("VaContract: P0 must be >= 0");
    if (static_cast<int>(guarantee.size()) < horizon)
      throw ValidationError("VaContract: guarantee schedule must cover I = 0.." +
                            std::to_string(horizon - 1));
    for (double g : guarantee)
      if (!std::isfinite(g) || g < 0.0) throw ValidationError("VaContract: bad guarantee rate");
    if (discount_override && !(*discount_override > 0.0 && *discount_override < 1.0))
      throw ValidationError("VaContract: discount must lie in (0, 1)");
  }
};

inline double guarantee_rate(const VaContract& contract, int first_withdrawal_time) {
  if (first_withdrawal_time < 0 || first_withdrawal_time > contract.horizon - 1)
    throw ValidationError("guarantee_rate: I=" + std::to_string(first_withdrawal_time) +
                          " outside 0.." + std::to_string(contract.horizon - 1));
  return contract.guarantee[static_cast<std::size_t>(first_withdrawal_time)];
}

struct VaState {
  double account = 0.0;      // W
  int first_withdrawal = 0;  // I

  State to_state() const { return make_state({account}, {first_withdrawal}); }
  static VaState from(const HybridPoint& x) { return {x.continuous[0], x.discrete[0]}; }
};

struct VaAction {
  double amount = 0.0;  // gamma
  int initiate = 0;     // tau

  Action to_action() const { return make_action({amount}, {initiate}); }
  static VaAction from(const Action& a) { return {a.continuous[0], a.discrete[0]}; }
  friend bool operator==(const VaAction&, const VaAction&) = default;
};

/// The bang-bang feasible set; t = 0 admits only the null action.
inline std::vector<VaAction> va_feasible_actions(const VaContract& contract, int t, const VaState& x) {
  if (t == 0) return {VaAction{0.0, 0}};
  const double guaranteed = guarantee_rate(contract, x.first_withdrawal) * contract.guarantee_base;
  const VaAction candidates[3] = {
      {0.0, x.first_withdrawal == 0 ? 0 : 1}, {guaranteed, 1}, {x.account, 1}};
  std::vector<VaAction> out;
  for (const VaAction& a : candidates)
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

/// gamma - kappa (gamma - G(I) P0)_+ before maturity, zero at inception.
inline double va_reward(const VaContract& contract, int t, const VaState& x, const VaAction& a) {
  const auto feasible = va_feasible_actions(contract, t, x);
  if (std::find(feasible.begin(), feasible.end(), a) == feasible.end())
    throw ContractError("va_reward: action (" + std::to_string(a.amount) + ", " +
                        std::to_string(a.initiate) + ") infeasible at t=" + std::to_string(t));
  if (t == 0) return 0.0;
  const double guaranteed = guarantee_rate(contract, x.first_withdrawal) * contract.guarantee_base;
  return a.amount - contract.penalty * positive_part(a.amount - guaranteed);
}

/// Reflection-principle bound on the probability that the account's running
/// maximum over the contract life reaches R.
inline double va_tail_probability(const VaContract& contract, double truncation) {
  const double w0 = contract.initial_premium;
  if (!(truncation > w0))
    throw ValidationError("va_tail_probability: R must exceed W0");
  if (!(contract.sigma > 0.0)) throw ValidationError("va_tail_probability: sigma must be > 0");
  const double sigma = contract.sigma;
  const double alpha = (contract.r - contract.q - 0.5 * sigma * sigma) / sigma;
  const double life = contract.delta * contract.horizon;
  const double level = std::log(truncation / w0) / sigma;
  const double root = std::sqrt(life);
  const double upper = normal_sf((level - alpha * life) / root);
  const double reflected =
      std::pow(truncation / w0, 2.0 * alpha / sigma) * normal_cdf((-level - alpha * life) / root);
  return upper + reflected;
}

class VaModel final : public ControlModel {
 public:
  explicit VaModel(VaContract contract) : contract_(std::move(contract)) {
    contract_.validate();
    innovation_ = contract_.innovation_spec();
  }

  const VaContract& contract() const { return contract_; }
  const LognormalInnovationSpec& innovation_law() const { return innovation_; }

  int horizon() const override { return contract_.horizon; }
  double discount() const override { return contract_.discount(); }
  State initial_state() const override { return VaState{contract_.initial_premium, 0}.to_state(); }

  /// S^I: records t as the first-withdrawal time when withdrawals start now.
  static int next_first_withdrawal(int t, int first_withdrawal, int initiate) {
    return (first_withdrawal == 0 && initiate == 1) ? t : first_withdrawal;
  }

  PostActionValue pre_action_map(int t, const State& x, const Action& a) const override {
    return make_post_action({positive_part(x.continuous[0] - a.continuous[0])},
                            {next_first_withdrawal(t, x.discrete[0], a.discrete[0])});
  }

  State innovation_map(int, const PostActionValue& k, const Innovation& e) const override {
    return make_state({k.continuous[0] * e[0]}, {k.discrete[0]});
  }

  ActionList feasible_actions(int t, const State& x) const override {
    check_state(x);
    ActionList out;
    if (t == 0) {
      out.push_back(make_action({0.0}, {0}));
      return out;
    }
    const double w = x.continuous[0];
    const int i = x.discrete[0];
    const double guaranteed = guaranteed_amount(i);
    const Action candidates[3] = {make_action({0.0}, {i == 0 ? 0 : 1}),
                                  make_action({guaranteed}, {1}), make_action({w}, {1})};
    for (const Action& a : candidates)
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    return out;
  }

  double intermediate_reward(int t, const State& x, const Action& a) const override {
    if (t == 0) return 0.0;
    const double gamma = a.continuous[0];
    return gamma - contract_.penalty * positive_part(gamma - guaranteed_amount(x.discrete[0]));
  }

  double terminal_reward(const State& x) const override { return x.continuous[0]; }

  Innovation draw_innovation(int, RandomGenerator& gen) const override {
    return Innovation{innovation_.draw(gen)};
  }
  Innovation neutral_innovation() const override { return Innovation{1.0}; }

  /// Direct form of the account/first-withdrawal recursion, for cross-checks.
  std::optional<State> monolithic_transition(int t, const State& x, const Action& a,
                                             const Innovation& e) const override {
    const double w_next = positive_part(x.continuous[0] - a.continuous[0]) * e[0];
    const int i = x.discrete[0];
    const int i_next = (i == 0 && a.discrete[0] == 1) ? t : i;
    return make_state({w_next}, {i_next});
  }

  double guaranteed_amount(int first_withdrawal) const {
    return guarantee_rate(contract_, first_withdrawal) * contract_.guarantee_base;
  }

 private:
  void check_state(const State& x) const {
    if (x.continuous.size() != 1 || x.discrete.size() != 1)
      throw ValidationError("VaModel: state must be (W, I)");
    if (!(x.continuous[0] >= 0.0) || !std::isfinite(x.continuous[0]))
      throw ValidationError("VaModel: account value must be finite and >= 0");
    if (x.discrete[0] < 0 || x.discrete[0] > contract_.horizon - 1)
      throw ValidationError("VaModel: first-withdrawal time out of range");
  }

  VaContract contract_;
  LognormalInnovationSpec innovation_;
};

/// [0, R] on the account value; the first-withdrawal label is not truncated.
inline TruncatedDomain va_domain(double truncation) { return TruncatedDomain::interval(0.0, truncation); }

}  // namespace bsbu
