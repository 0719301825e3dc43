#include <cmath>

#include <gtest/gtest.h>

#include "bsbu/solver.hpp"
#include "bsbu/va_model.hpp"

using namespace bsbu;

namespace {

VaModel phi_model(int horizon, double phi) {
  VaContract c = VaContract::with_horizon(horizon);
  c.discount_override = phi;
  return VaModel(c);
}

FittedSieve constant_fit(double c, int order = 3) {
  return FittedSieve(BernsteinBasis(order, 0.0, 4.0), std::vector<double>(static_cast<std::size_t>(order) + 1, c),
                     ShapeConstraint::Monotone);
}

SolverConfig small_config(std::size_t paths = 20000, int order = 20) {
  SolverConfig c;
  c.paths = paths;
  c.basis_order = order;
  c.repeats = 1;
  c.workers = 1;
  return c;
}

// Forwards to the contract model but poisons every innovation draw.
class PoisonedModel final : public ControlModel {
 public:
  explicit PoisonedModel(VaModel inner) : inner_(std::move(inner)) {}
  int horizon() const override { return inner_.horizon(); }
  double discount() const override { return inner_.discount(); }
  State initial_state() const override { return inner_.initial_state(); }
  PostActionValue pre_action_map(int t, const State& x, const Action& a) const override {
    return inner_.pre_action_map(t, x, a);
  }
  State innovation_map(int t, const PostActionValue& k, const Innovation& e) const override {
    return inner_.innovation_map(t, k, e);
  }
  ActionList feasible_actions(int t, const State& x) const override { return inner_.feasible_actions(t, x); }
  double intermediate_reward(int t, const State& x, const Action& a) const override {
    return inner_.intermediate_reward(t, x, a);
  }
  double terminal_reward(const State& x) const override { return inner_.terminal_reward(x); }
  Innovation draw_innovation(int, RandomGenerator&) const override { return Innovation{NAN}; }
  Innovation neutral_innovation() const override { return inner_.neutral_innovation(); }

 private:
  VaModel inner_;
};

}  // namespace

TEST(ContinuationQuery, AbsorbingAtZero) {
  const VaModel m = phi_model(12, 0.9975);
  const TruncatedDomain dom = va_domain(4.0);
  const ValueEstimate est(12, false);
  EXPECT_NEAR(continuation_query(est, m, dom, 9, make_post_action({0.0}, {3})), 0.059925, 1e-15);
  EXPECT_EQ(continuation_query(est, m, dom, 9, make_post_action({0.0}, {2})),
            boundary_value(m, 10, make_state({0.0}, {2})));
}

TEST(ContinuationQuery, AbsorbingAtUpperEdge) {
  const VaModel m = phi_model(12, 0.9975);
  const TruncatedDomain dom = va_domain(4.0);
  const ValueEstimate est(12, false);
  EXPECT_EQ(continuation_query(est, m, dom, 5, make_post_action({4.0}, {2})),
            boundary_value(m, 6, make_state({4.0}, {2})));
}

TEST(ContinuationQuery, InteriorUsesSlice) {
  const VaModel m = phi_model(12, 0.9975);
  const TruncatedDomain dom = va_domain(4.0);
  ValueEstimate est(12, false);
  est.set_slices(5, {{LabelVec{2}, constant_fit(0.81)}});
  EXPECT_NEAR(continuation_query(est, m, dom, 5, make_post_action({1.7}, {2})), 0.81, 1e-14);
  EXPECT_THROW(continuation_query(est, m, dom, 5, make_post_action({4.5}, {2})), RangeError);
  EXPECT_THROW(continuation_query(est, m, dom, 5, make_post_action({1.0}, {3})), InternalError);
}

TEST(ContinuationQuery, FallbackToNearestSlice) {
  const VaModel m = phi_model(12, 0.9975);
  const TruncatedDomain dom = va_domain(4.0);
  ValueEstimate est(12, true);
  est.set_slices(5, {{LabelVec{1}, constant_fit(0.4)}, {LabelVec{4}, constant_fit(0.9)}});
  EXPECT_NEAR(continuation_query(est, m, dom, 5, make_post_action({1.0}, {2})), 0.4, 1e-14);
  EXPECT_NEAR(continuation_query(est, m, dom, 5, make_post_action({1.0}, {3})), 0.9, 1e-14);
  EXPECT_EQ(est.fallback_warnings().size(), 2u);
}

TEST(BellmanUpdate, TerminalStep) {
  const VaModel m = phi_model(12, 0.9975);
  const ValueEstimate est(12, false);
  EXPECT_EQ(bellman_update(est, m, va_domain(4.0), 12, make_state({1.3}, {4})), 1.3);
}

TEST(BellmanUpdate, ThreeActionMaximum) {
  const VaModel m = phi_model(12, 0.9975);
  const TruncatedDomain dom = va_domain(4.0);
  ValueEstimate est(12, false);
  // C(k1) = k1 on both reachable slices.
  const FittedSieve identity(BernsteinBasis(1, 0.0, 4.0), {0.0, 4.0}, ShapeConstraint::Monotone);
  est.set_slices(11, {{LabelVec{0}, identity}, {LabelVec{11}, identity}});
  const double v = bellman_update(est, m, dom, 11, make_state({1.0}, {0}));
  const double expected = std::max({0.9975, 0.03 + 0.9975 * 0.97, 0.224});
  EXPECT_NEAR(v, expected, 1e-14);
  EXPECT_NEAR(v, 0.997575, 1e-12);
}

TEST(BellmanUpdate, BoundaryDispatch) {
  const VaModel m = phi_model(12, 0.9975);
  const ValueEstimate est(12, false);
  for (int t = 1; t < 12; ++t)
    EXPECT_EQ(bellman_update(est, m, va_domain(4.0), t, make_state({0.0}, {0})),
              boundary_value(m, t, make_state({0.0}, {0})));
}

TEST(Summarize, UnbiasedSd) {
  const SummaryStats s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.sd, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 4.0);
  EXPECT_EQ(summarize({7.0}).sd, 0.0);
  EXPECT_THROW(summarize({}), ValidationError);
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  c.paths = 10;
  c.basis_order = 20;
  EXPECT_THROW(c.validate(), ValidationError);
  c.paths = 21;
  EXPECT_NO_THROW(c.validate());
  c.repeats = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c.repeats = 1;
  c.truncation = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Engine, NamesRoundTrip) {
  for (const Engine& e : {Engine::bsbu(), Engine::fsbu(CrRule::CR0), Engine::fsbu(CrRule::CR1), Engine::fsbu(CrRule::CR2)})
    EXPECT_EQ(to_string(parse_engine(to_string(e))), to_string(e));
  EXPECT_THROW(parse_engine("lsmc"), ValidationError);
}

TEST(BsbuSolve, OneStepContractMatchesClosedForm) {
  const VaModel m{VaContract::with_horizon(1)};
  SolverConfig c = small_config(100000, 20);
  c.repeats = 10;
  const Experiment ex = repeat_experiment(m, va_domain(4.0), c, Engine::bsbu());
  const double exact = std::exp(-0.01 / 12.0);
  const double half_width = 2.5758293035489 * ex.stats.sd / std::sqrt(10.0);
  EXPECT_NEAR(ex.stats.mean, exact, half_width);
}

TEST(BsbuSolve, Deterministic) {
  const VaModel m{VaContract::with_horizon(4)};
  const SolverConfig c = small_config();
  EXPECT_EQ(bsbu_solve(m, va_domain(4.0), c).v0, bsbu_solve(m, va_domain(4.0), c).v0);
}

TEST(BsbuSolve, SliceStarvationReducesOrder) {
  const VaModel m{VaContract::with_horizon(12)};
  const RunResult r = bsbu_solve(m, va_domain(4.0), small_config(60, 20));
  bool reduced = false;
  for (const StepDiagnostic& d : r.diagnostics) {
    ASSERT_LE(d.basis_order + 1, static_cast<int>(d.sample_size));
    reduced = reduced || d.basis_order < 20;
  }
  EXPECT_TRUE(reduced);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_TRUE(std::isfinite(r.v0));
}

TEST(BsbuSolve, ShapePreservedAndValueMonotone) {
  const VaModel m{VaContract{}};
  const TruncatedDomain dom = va_domain(4.0);
  const RunResult r = bsbu_solve(m, dom, small_config(30000, 20));
  const ValueEstimate& est = *r.estimate;
  for (int t = 0; t < 12; ++t) {
    for (const ValueEstimate::Slice& s : est.slices(t)) {
      double prev = -INFINITY;
      for (int i = 0; i < 200; ++i) {
        const double v = s.fit.predict(4.0 * i / 199.0);
        ASSERT_GE(v, prev - 1e-8) << "t=" << t;
        prev = v;
      }
    }
    for (int label = 0; label <= std::max(t - 1, 0); ++label) {
      double prev = -INFINITY;
      for (int i = 1; i <= 200; ++i) {
        const double v = bellman_update(est, m, dom, t, make_state({4.0 * i / 201.0}, {label}));
        ASSERT_GE(v, prev - 1e-8) << "t=" << t << " I=" << label << " W=" << 4.0 * i / 201.0;
        prev = v;
      }
    }
  }
}

TEST(BsbuSolve, NoDownwardJumpAtZeroAccount) {
  const VaModel m{VaContract{}};
  const TruncatedDomain dom = va_domain(4.0);
  const RunResult r = bsbu_solve(m, dom, small_config(30000, 20));
  for (int t = 1; t < 12; ++t) {
    double rmse = 0.0;
    for (const StepDiagnostic& d : r.diagnostics)
      if (d.step == t) rmse = std::max(rmse, std::sqrt(d.ssr / static_cast<double>(d.sample_size)));
    for (int label = 0; label < t; ++label) {
      const double at_zero = bellman_update(*r.estimate, m, dom, t, make_state({0.0}, {label}));
      const double near_zero = bellman_update(*r.estimate, m, dom, t, make_state({1e-6}, {label}));
      EXPECT_GE(near_zero, at_zero - 10.0 * rmse) << "t=" << t << " I=" << label;
    }
  }
}

TEST(BsbuSolve, RawRegressionCompletes) {
  const VaModel m{VaContract{}};
  SolverConfig c = small_config(20000, 20);
  c.constraint = ShapeConstraint::None;
  const RunResult r = bsbu_solve(m, va_domain(4.0), c);
  EXPECT_TRUE(std::isfinite(r.v0));
  EXPECT_EQ(r.diagnostics.size(), 1u + 2 + 3 + 4 + 5 + 6 + 7 + 8 + 9 + 10 + 11 + 12);
}

TEST(BsbuSolve, SelectionPicksFromCandidates) {
  const VaModel m{VaContract::with_horizon(3)};
  SolverConfig c = small_config(3000, 8);
  c.selection = BasisSelection{{4, 8, 12}, SelectionCriterion::GCV};
  const RunResult r = bsbu_solve(m, va_domain(4.0), c);
  for (const StepDiagnostic& d : r.diagnostics) EXPECT_TRUE(d.basis_order == 4 || d.basis_order == 8 || d.basis_order == 12);
}

TEST(RepeatRuns, WorkerCountDoesNotChangeResults) {
  const VaModel m{VaContract::with_horizon(3)};
  SolverConfig c = small_config(5000, 10);
  c.repeats = 5;
  c.workers = 1;
  const auto serial = repeat_runs(m, va_domain(4.0), c, Engine::bsbu());
  c.workers = 3;
  const auto parallel = repeat_runs(m, va_domain(4.0), c, Engine::bsbu());
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(serial[i].v0, parallel[i].v0);
  EXPECT_NE(serial[0].v0, serial[1].v0);
}

TEST(RepeatRuns, SameStreamGivesZeroSd) {
  const VaModel m{VaContract::with_horizon(3)};
  SolverConfig c = small_config(5000, 10);
  c.repeats = 2;
  EXPECT_EQ(repeat_experiment(m, va_domain(4.0), c, Engine::bsbu(), true).stats.sd, 0.0);
}

TEST(RepeatRuns, FailureNamesRepeat) {
  const PoisonedModel m{VaModel{VaContract::with_horizon(3)}};
  SolverConfig c = small_config(100, 5);
  c.repeats = 3;
  c.workers = 2;
  try {
    repeat_runs(m, va_domain(4.0), c, Engine::bsbu());
    FAIL() << "poisoned model did not fail";
  } catch (const RepeatError& e) {
    EXPECT_EQ(e.repeat, 0);
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(FsbuSolve, Cr0FitsOneSlicePerStep) {
  const VaModel m{VaContract::with_horizon(6)};
  const TruncatedDomain dom = va_domain(4.0);
  const RunResult r = fsbu_solve(m, dom, small_config(5000, 10), CrRule::CR0);
  for (int t = 1; t < 6; ++t) {
    ASSERT_EQ(r.estimate->slices(t).size(), 1u);
    EXPECT_EQ(r.estimate->slices(t)[0].label, LabelVec{1});
    const double a = continuation_query(*r.estimate, m, dom, t, make_post_action({1.0}, {1}));
    for (int label = 0; label <= t; ++label)
      EXPECT_EQ(continuation_query(*r.estimate, m, dom, t, make_post_action({1.0}, {label})), a);
  }
  EXPECT_FALSE(r.estimate->fallback_warnings().empty());
}

TEST(FsbuSolve, Cr1ExcludesAbsorbedPaths) {
  const VaModel m{VaContract{}};
  const RunResult r = fsbu_solve(m, va_domain(4.0), small_config(20000, 10), CrRule::CR1);
  ASSERT_TRUE(std::isfinite(r.v0));
  for (const StepDiagnostic& d : r.diagnostics)
    if (d.step == 11) EXPECT_GT(d.absorbed_fraction, 0.5);
}

TEST(FsbuSolve, BsbuVarianceNoWorseThanCr2) {
  const VaModel m{VaContract{}};
  SolverConfig c = small_config(20000, 20);
  c.repeats = 10;
  c.workers = 0;
  const Experiment b = repeat_experiment(m, va_domain(4.0), c, Engine::bsbu());
  const Experiment f = repeat_experiment(m, va_domain(4.0), c, Engine::fsbu(CrRule::CR2));
  ASSERT_TRUE(std::isfinite(b.stats.mean));
  ASSERT_TRUE(std::isfinite(f.stats.mean));
  EXPECT_LE(b.stats.sd, f.stats.sd);
}
