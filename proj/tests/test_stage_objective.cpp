#include <gtest/gtest.h>

#include "acpo/gridworld.hpp"
#include "acpo/stage_objective.hpp"
#include "acpo/verification.hpp"

using namespace acpo;

TEST(Barrier, MatchesLogInsideAndIsContinuouslyDifferentiableAtTheSwitch) {
  const double t = 25.0, cap = 25.0;
  EXPECT_NEAR(barrier_phi(-2.0, t, cap), std::log(2.0) / t, 1e-15);
  EXPECT_NEAR(barrier_slope(-2.0, t, cap), -1.0 / (t * 2.0), 1e-15);
  const double x0 = -1.0 / (t * cap);
  for (double dx : {1e-10, 1e-11}) {
    EXPECT_NEAR(barrier_phi(x0 - dx, t, cap), barrier_phi(x0 + dx, t, cap), 1e-7);
    EXPECT_NEAR(barrier_slope(x0 - dx, t, cap), barrier_slope(x0 + dx, t, cap), 1e-4);
  }
  EXPECT_DOUBLE_EQ(barrier_slope(1.0, t, cap), -cap);
}

TEST(Barrier, IsCappedAndFiniteOnTheInfeasibleSide) {
  const double t = 10.0, cap = 5.0;
  for (double x : {-1e6, -1.0, 0.0, 3.0, 1e6}) {
    EXPECT_TRUE(std::isfinite(barrier_phi(x, t, cap)));
    EXPECT_LE(barrier_phi(x, t, cap), cap);
    EXPECT_GE(barrier_slope(x, t, cap), -cap);
  }
}

TEST(StageObjective, ValidateRejectsBadFields) {
  StageObjective obj;
  obj.cost_budget = Vector::Constant(1, 1.0);
  EXPECT_NO_THROW(obj.validate(1));
  obj.clip_ratio = 1.5;
  EXPECT_THROW(obj.validate(1), std::invalid_argument);
  obj.clip_ratio = 0.2;
  obj.barrier_t = 0.0;
  EXPECT_THROW(obj.validate(1), std::invalid_argument);
}

TEST(Gradient, AnalyticMatchesCentralDifferencesForEveryStage) {
  const SuiteResult r = run_gradient_suite(7, 30, 1e-5);
  ASSERT_EQ(r.reports.size(), 30u);
  for (const auto& rep : r.reports) EXPECT_TRUE(rep.pass) << rep.name << " " << rep.context << " " << rep.lhs;
}

namespace {

struct Fixture {
  CmdpSpec spec = build_gridworld("hazard-goal", 5, 0);
  PolicyParams params = PolicyParams::tabular(spec.num_states, spec.num_actions);
  TrajectoryBatch batch;
  EstimateSet est;
  Fixture() {
    batch = collect(spec, params, 4000, 2);
    EstimatorConfig cfg;
    cfg.gamma = spec.discount;
    est = estimate(batch, Critic::zeros(spec.num_states, 1), cfg);
  }
};

}  // namespace

TEST(Surrogate, CostConstraintAtSamplingPolicyIsEstimateMinusBudget) {
  Fixture f;
  const double c = surrogate_cost_constraint(f.batch, f.est, f.params, 2.0, 0);
  EXPECT_NEAR(c, f.est.episode_cost_returns[0] - 2.0, 1e-9);
}

TEST(Surrogate, MinCostWithoutActiveConstraintsThrows) {
  Fixture f;
  StageObjective obj;
  obj.kind = StageKind::MinCost;
  obj.cost_budget = Vector::Constant(1, 5.0);
  EXPECT_THROW(min_cost_objective(f.batch, f.est, f.params, obj), std::invalid_argument);
}

TEST(Ascend, StopsEarlyOnceKlReachesThreshold) {
  Fixture f;
  StageObjective obj;
  obj.cost_budget = Vector::Constant(1, 50.0);
  AscendConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.kl_stop = 1e-3;
  Rng rng = make_rng(1, "ascend");
  const AscendResult r = ascend(f.params, f.batch, f.est, obj, cfg, rng);
  EXPECT_TRUE(r.log.early_stopped);
  EXPECT_LT(r.log.epochs_run, cfg.epochs);
  EXPECT_GE(r.log.kl, cfg.kl_stop);
}

TEST(Ascend, IsDeterministicGivenTheRngStream) {
  Fixture f;
  StageObjective obj;
  obj.cost_budget = Vector::Constant(1, 50.0);
  AscendConfig cfg;
  cfg.epochs = 5;
  Rng a = make_rng(3, "ascend");
  Rng b = make_rng(3, "ascend");
  EXPECT_TRUE(ascend(f.params, f.batch, f.est, obj, cfg, a).params ==
              ascend(f.params, f.batch, f.est, obj, cfg, b).params);
}

TEST(BatchKl, IsZeroAgainstItself) {
  Fixture f;
  EXPECT_NEAR(batch_kl(f.params, f.params, f.batch), 0.0, 1e-15);
}
