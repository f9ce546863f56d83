#include <gtest/gtest.h>

#include "acpo/gridworld.hpp"
#include "acpo/verification.hpp"

using namespace acpo;

TEST(RandomCmdp, IsValidWithRequestedShape) {
  Rng rng = make_rng(0, "random-cmdp");
  const CmdpSpec spec = random_cmdp(rng, 6, 3, 2);
  EXPECT_NO_THROW(spec.validate());
  EXPECT_EQ(spec.num_states, 6);
  EXPECT_EQ(spec.num_costs(), 2);
  EXPECT_GE(spec.discount, 0.8);
  EXPECT_LE(spec.discount, 0.99);
}

TEST(LemmaSuite, SmallRunHasNoFailures) {
  const SuiteResult r = run_lemma_suite(1, 4, 10);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.failed(), 0);
  EXPECT_GT(r.passed(), 40);
}

TEST(GapSuite, SmallRunHasNoFailuresAndChecksScaling) {
  GapSuiteConfig cfg;
  cfg.instances = 4;
  cfg.t_values = {10.0, 20.0};
  cfg.grid_resolution = 400;
  const SuiteResult r = run_gap_suite(2, cfg);
  EXPECT_TRUE(r.ok());
  int scaling = 0;
  for (const auto& rep : r.reports) scaling += rep.name.rfind("gap-envelope-scaling", 0) == 0;
  EXPECT_EQ(scaling, 1);
}

TEST(BindingInstance, UnconstrainedOptimumViolatesTheConstraint) {
  Rng rng = make_rng(5, "binding");
  for (int k = 0; k < 5; ++k) {
    const GapInstance inst = random_binding_gap_instance(rng);
    const GapAffine a = gap_affine_terms(inst);
    double h_best = a.h0, h_min = a.h0;
    for (int s = 0; s < 2; ++s) {
      h_best += a.fs[s] > 0.0 ? a.hs[s] : 0.0;
      h_min += std::min(0.0, a.hs[s]);
    }
    EXPECT_GT(h_best, 0.0);
    EXPECT_LT(h_min, 0.0);
  }
}

TEST(BoundsSuite, ShortRunPassesEveryStagePairBound) {
  const CmdpSpec spec = build_gridworld("hazard-goal", 4, 0);
  TrainConfig cfg;
  cfg.batch_size = 1500;
  cfg.num_iterations = 40;
  cfg.optimizer.epochs = 10;
  cfg.stage.n_e = 5;
  cfg.stage.n1 = 4;
  cfg.stage.n2 = 2;
  cfg.stage.d0 = Vector::Constant(1, 5.0);
  cfg.stage.desired = Vector::Constant(1, 1.0);
  BudgetBoundConfig b;
  b.n1 = 4;
  b.n2 = 2;
  RunResult run;
  const SuiteResult r = run_bounds_suite(spec, cfg, 1, b, &run);
  EXPECT_EQ(r.failed(), 0);
  EXPECT_GT(r.passed(), 0);
  EXPECT_EQ(run.policies.size(), run.records.size() + 1);
}

TEST(SuiteResult, JsonAndTableCarryTotals) {
  SuiteResult r;
  r.suite = "demo";
  BoundReport a;
  a.name = "ok";
  a.lhs = 1.0;
  a.rhs = 2.0;
  a.settle();
  BoundReport b = a;
  b.name = "bad";
  b.lhs = 3.0;
  b.settle();
  r.reports = {a, b};
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(to_json(r)["failed"], 1);
  const std::string t = summary_table(r, true);
  EXPECT_NE(t.find("bad"), std::string::npos);
  EXPECT_EQ(t.find("ok "), std::string::npos);
}
