#include <cmath>

#include <gtest/gtest.h>

#include "bsbu/simulate.hpp"
#include "bsbu/va_model.hpp"

using namespace bsbu;

namespace {

struct Fractions {
  double w_zero = 0.0;     // current state W = 0
  double post_i_zero = 0.0;  // post-action label 0
};

Fractions fractions(const ForwardSample& fs) {
  Fractions f;
  const double n = static_cast<double>(fs.current.size());
  for (std::size_t m = 0; m < fs.current.size(); ++m) {
    f.w_zero += fs.current[m].continuous[0] == 0.0 ? 1.0 : 0.0;
    f.post_i_zero += fs.post_actions[m].discrete[0] == 0 ? 1.0 : 0.0;
  }
  f.w_zero /= n;
  f.post_i_zero /= n;
  return f;
}

}  // namespace

TEST(SamplePostActions, RangeMembership) {
  const auto ks = sample_post_actions(7, 4.0, 50000, RandomStream{1, 1});
  ASSERT_EQ(ks.size(), 50000u);
  for (const PostActionValue& k : ks) {
    ASSERT_GT(k.continuous[0], 0.0);
    ASSERT_LT(k.continuous[0], 4.0);
    ASSERT_GE(k.discrete[0], 0);
    ASSERT_LE(k.discrete[0], 7);
  }
}

TEST(SamplePostActions, LabelFrequencies) {
  const std::size_t m = 100000;
  const auto ks = sample_post_actions(11, 4.0, m, RandomStream{2, 0});
  std::vector<double> counts(12, 0.0);
  double k1_sum = 0.0;
  for (const PostActionValue& k : ks) {
    counts[static_cast<std::size_t>(k.discrete[0])] += 1.0;
    k1_sum += k.continuous[0];
  }
  const double p = 1.0 / 12.0;
  for (double c : counts) EXPECT_NEAR(c / m, p, 4.0 * std::sqrt(p * (1 - p) / m));
  EXPECT_NEAR(k1_sum / m, 2.0, 4.0 * 4.0 / std::sqrt(12.0 * m));
}

TEST(SamplePostActions, SingleLabelAtZero) {
  for (const PostActionValue& k : sample_post_actions(0, 4.0, 1000, RandomStream{3, 0})) EXPECT_EQ(k.discrete[0], 0);
}

TEST(SamplePostActions, ValidatesInputs) {
  EXPECT_THROW(sample_post_actions(3, 4.0, 0, RandomStream{}), ValidationError);
  EXPECT_THROW(sample_post_actions(3, 0.0, 10, RandomStream{}), ValidationError);
  EXPECT_THROW(sample_post_actions(-1, 4.0, 10, RandomStream{}), ValidationError);
}

TEST(SamplePostActions, Deterministic) {
  EXPECT_EQ(sample_post_actions(5, 4.0, 1000, RandomStream{8, 2}), sample_post_actions(5, 4.0, 1000, RandomStream{8, 2}));
}

TEST(CrRule, NamesRoundTrip) {
  for (CrRule r : {CrRule::CR0, CrRule::CR1, CrRule::CR2}) EXPECT_EQ(parse_cr_rule(to_string(r)), r);
  EXPECT_THROW(parse_cr_rule("cr9"), ValidationError);
}

TEST(CrRule, SingletonConsumesNoRandomness) {
  ActionList one;
  one.push_back(make_action({0.0}, {0}));
  RandomGenerator g = RandomStream{1, 0}.generator();
  RandomGenerator ref = g;
  for (CrRule r : {CrRule::CR0, CrRule::CR1, CrRule::CR2}) EXPECT_EQ(draw_cr_action(r, one, g), one[0]);
  EXPECT_EQ(g.next_u64(), ref.next_u64());
}

TEST(ForwardSimulate, Cr0PopulatesOneLabel) {
  const VaModel model{VaContract{}};
  for (int t = 1; t < 12; ++t) {
    const ForwardSample fs = forward_simulate(model, va_domain(4.0), CrRule::CR0, t, 2000, RandomStream{4, 0});
    for (const PostActionValue& k : fs.post_actions) ASSERT_EQ(k.discrete[0], 1) << "t=" << t;
  }
}

TEST(ForwardSimulate, Cr2LabelZeroHalvesEachStep) {
  const VaModel model{VaContract{}};
  const ForwardSample fs = forward_simulate(model, va_domain(4.0), CrRule::CR2, 11, 100000, RandomStream{5, 0});
  const double f = fractions(fs).post_i_zero;
  EXPECT_GE(f, 0.5 * std::pow(2.0, -11));
  EXPECT_LE(f, 2.0 * std::pow(2.0, -11));
}

TEST(ForwardSimulate, Cr1AbsorbsMoreThanCr2) {
  const VaModel model{VaContract{}};
  const ForwardSample cr1 = forward_simulate(model, va_domain(4.0), CrRule::CR1, 11, 20000, RandomStream{6, 0});
  const ForwardSample cr2 = forward_simulate(model, va_domain(4.0), CrRule::CR2, 11, 20000, RandomStream{6, 1});
  EXPECT_GT(fractions(cr1).w_zero, 0.5);
  EXPECT_GT(fractions(cr1).w_zero, fractions(cr2).w_zero);
}

TEST(ForwardSimulate, PathsStayInBoxAndReplay) {
  const VaModel model{VaContract{}};
  const TruncatedDomain dom = va_domain(1.3);
  const ForwardSample a = forward_simulate(model, dom, CrRule::CR1, 8, 3000, RandomStream{7, 3}, true);
  const ForwardSample b = forward_simulate(model, dom, CrRule::CR1, 8, 3000, RandomStream{7, 3}, true);
  ASSERT_EQ(a.paths.size(), 3000u);
  for (std::size_t m = 0; m < a.paths.size(); ++m) {
    ASSERT_EQ(a.paths[m].size(), 9u);
    for (const State& x : a.paths[m]) ASSERT_TRUE(dom.in_closure(x.continuous));
    ASSERT_EQ(a.paths[m].back(), a.next[m]);
  }
  EXPECT_EQ(a.next, b.next);
  EXPECT_EQ(a.post_actions, b.post_actions);
}

TEST(ForwardSimulate, ValidatesStep) {
  const VaModel model{VaContract{}};
  EXPECT_THROW(forward_simulate(model, va_domain(4.0), CrRule::CR1, 12, 10, RandomStream{}), ValidationError);
  EXPECT_THROW(forward_simulate(model, va_domain(4.0), CrRule::CR1, 3, 0, RandomStream{}), ValidationError);
}
