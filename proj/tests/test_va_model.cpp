#include <cmath>

#include <gtest/gtest.h>

#include "bsbu/va_model.hpp"

using namespace bsbu;

TEST(GuaranteeRate, Schedule) {
  const VaContract c;
  EXPECT_EQ(guarantee_rate(c, 0), 0.03);
  EXPECT_EQ(guarantee_rate(c, 3), 0.03);
  EXPECT_EQ(guarantee_rate(c, 4), 0.05);
  EXPECT_EQ(guarantee_rate(c, 5), 0.05);
  EXPECT_EQ(guarantee_rate(c, 8), 0.07);
  EXPECT_EQ(guarantee_rate(c, 9), 0.07);
  EXPECT_EQ(guarantee_rate(c, 11), 0.07);
  EXPECT_THROW(guarantee_rate(c, 12), ValidationError);
  EXPECT_THROW(guarantee_rate(c, -1), ValidationError);
}

TEST(GuaranteeRate, CustomSchedule) {
  VaContract c;
  c.guarantee.assign(12, 0.04);
  EXPECT_EQ(guarantee_rate(c, 9), 0.04);
}

TEST(FeasibleActions, NotInitiated) {
  const auto a = va_feasible_actions(VaContract{}, 3, {1.0, 0});
  EXPECT_EQ(a, (std::vector<VaAction>{{0.0, 0}, {0.03, 1}, {1.0, 1}}));
}

TEST(FeasibleActions, Initiated) {
  const auto a = va_feasible_actions(VaContract{}, 3, {0.5, 1});
  EXPECT_EQ(a, (std::vector<VaAction>{{0.0, 1}, {0.03, 1}, {0.5, 1}}));
}

TEST(FeasibleActions, InceptionIsNullAction) {
  EXPECT_EQ(va_feasible_actions(VaContract{}, 0, {1.0, 0}), (std::vector<VaAction>{{0.0, 0}}));
}

TEST(FeasibleActions, DuplicatesRemoved) {
  EXPECT_EQ(va_feasible_actions(VaContract{}, 4, {0.03, 2}), (std::vector<VaAction>{{0.0, 1}, {0.03, 1}}));
  EXPECT_EQ(va_feasible_actions(VaContract{}, 4, {0.0, 2}), (std::vector<VaAction>{{0.0, 1}, {0.03, 1}}));
}

TEST(FeasibleActions, ModelAgreesWithFreeFunction) {
  const VaContract c;
  const VaModel m(c);
  for (int t = 0; t < 12; ++t)
    for (int i = 0; i < 12; ++i)
      for (double w : {0.0, 0.03, 0.05, 0.4, 1.0, 3.0}) {
        const auto list = va_feasible_actions(c, t, {w, i});
        const ActionList actions = m.feasible_actions(t, VaState{w, i}.to_state());
        ASSERT_EQ(list.size(), actions.size());
        for (std::size_t k = 0; k < list.size(); ++k) {
          ASSERT_EQ(list[k].to_action(), actions[k]);
          ASSERT_EQ(va_reward(c, t, {w, i}, list[k]), m.intermediate_reward(t, VaState{w, i}.to_state(), actions[k]));
        }
      }
}

TEST(Reward, Examples) {
  const VaContract c;
  EXPECT_EQ(va_reward(c, 3, {1.0, 0}, {0.03, 1}), 0.03);
  EXPECT_NEAR(va_reward(c, 3, {1.0, 0}, {1.0, 1}), 1.0 - 0.8 * 0.97, 1e-15);
  EXPECT_NEAR(va_reward(c, 3, {1.0, 0}, {1.0, 1}), 0.224, 1e-15);
  EXPECT_EQ(va_reward(c, 3, {1.0, 0}, {0.0, 0}), 0.0);
  EXPECT_EQ(va_reward(c, 0, {1.0, 0}, {0.0, 0}), 0.0);
  EXPECT_THROW(va_reward(c, 3, {1.0, 0}, {0.5, 1}), ContractError);
  EXPECT_EQ(VaModel(c).terminal_reward(make_state({1.7}, {4})), 1.7);
}

TEST(Reward, SlopeAboveGuaranteeIsOneMinusKappa) {
  const VaModel m{VaContract{}};
  for (int i : {1, 5, 9}) {
    const double g = m.guaranteed_amount(i);
    double prev = m.intermediate_reward(6, VaState{g, i}.to_state(), make_action({g}, {1}));
    for (int k = 1; k <= 50; ++k) {
      const double w = g + 0.05 * k;
      const double r = m.intermediate_reward(6, VaState{w, i}.to_state(), make_action({w}, {1}));
      EXPECT_NEAR(r - prev, 0.2 * 0.05, 1e-12);
      prev = r;
    }
  }
}

TEST(Transition, FirstWithdrawalRecording) {
  const VaModel m{VaContract{}};
  for (int t = 1; t < 12; ++t)
    for (int i = 0; i < 12; ++i)
      for (int tau : {0, 1}) {
        if (i > 0 && tau == 0) continue;  // tau = 1 once initiated
        const PostActionValue k = m.pre_action_map(t, VaState{1.0, i}.to_state(), make_action({0.0}, {tau}));
        const int expected = (i == 0 && tau == 1) ? t : i;
        ASSERT_EQ(k.discrete[0], expected) << "t=" << t << " I=" << i << " tau=" << tau;
        ASSERT_EQ(VaModel::next_first_withdrawal(t, i, tau), expected);
      }
}

TEST(Transition, MatchesDirectRecursion) {
  const VaModel m{VaContract{}};
  RandomGenerator g = RandomStream{31, 0}.generator();
  for (int trial = 0; trial < 10000; ++trial) {
    const int t = static_cast<int>(g.uniform_index(12));
    const VaState x{2.0 * g.uniform_open(), static_cast<int>(g.uniform_index(12))};
    const auto actions = va_feasible_actions(m.contract(), t, x);
    const VaAction a = actions[g.uniform_index(actions.size())];
    const double e = m.innovation_law().draw(g);
    const PostActionValue k = m.pre_action_map(t, x.to_state(), a.to_action());
    ASSERT_EQ(k.continuous[0], std::max(x.account - a.amount, 0.0));
    ASSERT_EQ(k.discrete[0], (x.first_withdrawal == 0 && a.initiate == 1) ? t : x.first_withdrawal);
    const State next = m.innovation_map(t, k, Innovation{e});
    ASSERT_EQ(next.continuous[0], k.continuous[0] * e);
    ASSERT_EQ(next.discrete[0], k.discrete[0]);
  }
}

TEST(TailProbability, ReferenceContract) {
  const double p = va_tail_probability(VaContract{}, 4.0);
  // Closed form evaluated independently in long double.
  const long double sigma = 0.15L, alpha = (0.03L - 0.01L - 0.5L * sigma * sigma) / sigma;
  const long double level = std::log(4.0L) / sigma;
  const long double root = 1.0L;
  const long double upper = 0.5L * std::erfc((level - alpha) / root / std::sqrt(2.0L));
  const long double refl = std::pow(4.0L, 2.0L * alpha / sigma) * 0.5L * std::erfc((level + alpha) / root / std::sqrt(2.0L));
  EXPECT_NEAR(p / static_cast<double>(upper + refl), 1.0, 1e-10);
}

TEST(TailProbability, LimitAtPremiumIsOne) {
  EXPECT_NEAR(va_tail_probability(VaContract{}, 1.0 + 1e-12), 1.0, 1e-9);
  EXPECT_THROW(va_tail_probability(VaContract{}, 1.0), ValidationError);
  EXPECT_THROW(va_tail_probability(VaContract{}, 0.5), ValidationError);
}

TEST(TailProbability, DecreasingInTruncation) {
  const VaContract c;
  EXPECT_GT(va_tail_probability(c, 2.0), va_tail_probability(c, 4.0));
  double prev = 1.0;
  for (int i = 0; i <= 69; ++i) {
    const double r = 1.1 + 0.1 * i;
    const double p = va_tail_probability(c, r);
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 1.0);
    ASSERT_LT(p, prev);
    prev = p;
  }
}

TEST(Contract, Validation) {
  VaContract c;
  c.penalty = 1.5;
  EXPECT_THROW(VaModel{c}, ValidationError);
  c = VaContract{};
  c.guarantee.resize(5);
  EXPECT_THROW(VaModel{c}, ValidationError);
  c = VaContract{};
  c.sigma = -0.1;
  EXPECT_THROW(VaModel{c}, ValidationError);
  c = VaContract{};
  EXPECT_NEAR(VaModel{c}.discount(), std::exp(-0.03 / 12.0), 1e-16);
  EXPECT_THROW(VaModel{c}.feasible_actions(3, make_state({1.0}, {12})), ValidationError);
  EXPECT_THROW(VaModel{c}.feasible_actions(3, make_state({-0.1}, {0})), ValidationError);
}
