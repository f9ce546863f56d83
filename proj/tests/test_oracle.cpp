#include <gtest/gtest.h>

#include "acpo/gridworld.hpp"
#include "acpo/oracle.hpp"
#include "acpo/verification.hpp"

using namespace acpo;

TEST(Simplex, SolvesTextbookProgram) {
  // max 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18.
  LinearProgram lp;
  lp.c = Vector{{3.0, 5.0}};
  lp.a_eq = Matrix(0, 2);
  lp.b_eq = Vector(0);
  lp.a_ub = Matrix(3, 2);
  lp.a_ub << 1, 0, 0, 2, 3, 2;
  lp.b_ub = Vector{{4.0, 12.0, 18.0}};
  const SimplexResult r = simplex_solve(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, 36.0, 1e-9);
  EXPECT_NEAR(r.x[0], 2.0, 1e-9);
  EXPECT_NEAR(r.x[1], 6.0, 1e-9);
}

TEST(Simplex, HandlesEqualitiesWithNegativeRightHandSides) {
  // max -x - y  s.t.  -x - y = -3, x - y <= 1: optimum -3 anywhere on the segment.
  LinearProgram lp;
  lp.c = Vector{{-1.0, -1.0}};
  lp.a_eq = Matrix(1, 2);
  lp.a_eq << -1, -1;
  lp.b_eq = Vector{{-3.0}};
  lp.a_ub = Matrix(1, 2);
  lp.a_ub << 1, -1;
  lp.b_ub = Vector{{1.0}};
  const SimplexResult r = simplex_solve(lp);
  ASSERT_EQ(r.status, LpStatus::Optimal);
  EXPECT_NEAR(r.objective, -3.0, 1e-9);
  EXPECT_LE(r.x[0] - r.x[1], 1.0 + 1e-9);
}

TEST(Simplex, DetectsInfeasibleAndUnbounded) {
  LinearProgram lp;
  lp.c = Vector{{1.0, 1.0}};
  lp.a_eq = Matrix(0, 2);
  lp.b_eq = Vector(0);
  lp.a_ub = Matrix(1, 2);
  lp.a_ub << 1, 1;
  lp.b_ub = Vector{{-1.0}};
  EXPECT_EQ(simplex_solve(lp).status, LpStatus::Infeasible);
  lp.a_ub << 1, -1;
  lp.b_ub = Vector{{1.0}};
  EXPECT_EQ(simplex_solve(lp).status, LpStatus::Unbounded);
}

struct Reference {
  const char* kind;
  std::vector<double> budget;
  double j_star;
};

class LpReference : public ::testing::TestWithParam<Reference> {};

TEST_P(LpReference, MatchesKnownOptimumAndItsPolicyAttainsIt) {
  const Reference ref = GetParam();
  const CmdpSpec spec = build_gridworld(ref.kind, 5, 0);
  const Vector d = Eigen::Map<const Vector>(ref.budget.data(), ref.budget.size());
  const LpSolution sol = lp_solve(spec, d);
  ASSERT_TRUE(sol.feasible());
  EXPECT_NEAR(sol.j_star, ref.j_star, 1e-3);
  // The extracted stationary policy reproduces the LP values exactly.
  const ExactEval ex = exact_eval(spec, sol.policy);
  EXPECT_NEAR(ex.j_reward, sol.j_star, 1e-7);
  for (int i = 0; i < d.size(); ++i) EXPECT_LE(ex.j_cost[i], d[i] + 1e-7);
  EXPECT_NEAR(sol.occupancy.sum(), 1.0, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(
    Gridworlds, LpReference,
    ::testing::Values(Reference{"hazard-goal", {1.0}, 2.5468}, Reference{"trap", {0.5}, 5.2082},
                      Reference{"two-cost", {0.5, 0.5}, 1.9057},
                      Reference{"two-cost", {0.4, 0.4}, 1.7620},
                      Reference{"two-cost", {0.6, 0.6}, 2.0494}));

TEST(LpSolve, ZeroBudgetOnAnUnavoidableCostIsInfeasible) {
  CmdpSpec spec = make_empty_spec(1, 1, 1, 0.9, 10);
  spec.p(0, 0, 0) = 1.0;
  spec.costs[0](0, 0) = 1.0;
  spec.initial_dist << 1.0;
  EXPECT_FALSE(lp_solve(spec, Vector::Zero(1)).feasible());
}

TEST(ParetoFront, IsNonDecreasingInTheBudget) {
  const CmdpSpec spec = build_gridworld("hazard-goal", 5, 0);
  std::vector<Vector> budgets;
  for (double d : {0.1, 0.5, 1.0, 2.0, 4.0}) budgets.push_back(Vector::Constant(1, d));
  const auto front = pareto_front(spec, budgets);
  ASSERT_EQ(front.size(), budgets.size());
  for (std::size_t k = 1; k < front.size(); ++k) {
    EXPECT_LE(front[k - 1].budget[0], front[k].budget[0]);
    if (front[k - 1].feasible) EXPECT_LE(front[k - 1].j_star, front[k].j_star + 1e-9);
  }
  std::swap(budgets[0], budgets[3]);
  EXPECT_THROW(pareto_front(spec, budgets), std::invalid_argument);
}

TEST(PerformanceBound, HoldsOnARandomPolicyPair) {
  Rng rng = make_rng(9, "pair");
  const CmdpSpec spec = random_cmdp(rng, 5, 3, 2);
  Matrix a = Matrix::Constant(5, 3, 1.0 / 3.0);
  Matrix b(5, 3);
  for (int s = 0; s < 5; ++s) b.row(s) << 0.6, 0.3, 0.1;
  const auto reps = check_performance_bound(spec, a, b);
  EXPECT_EQ(reps.size(), 2u * 3u);
  for (const auto& r : reps) EXPECT_TRUE(r.pass) << r.name << " slack " << r.slack;
}

TEST(PerformanceBound, IsTightForIdenticalPolicies) {
  Rng rng = make_rng(2, "pair");
  const CmdpSpec spec = random_cmdp(rng, 4, 2, 1);
  const Matrix p = Matrix::Constant(4, 2, 0.5);
  for (const auto& r : check_performance_bound(spec, p, p)) {
    EXPECT_NEAR(r.lhs, 0.0, 1e-10);
    EXPECT_NEAR(r.rhs, 0.0, 1e-10);
  }
}

TEST(Epsilons, VanishForIdenticalPolicies) {
  const CmdpSpec spec = build_gridworld("trap", 5, 0);
  const PolicyParams p = PolicyParams::tabular(spec.num_states, spec.num_actions);
  const Epsilons e = epsilons(spec, p, p);
  EXPECT_NEAR(e.reward, 0.0, 1e-10);
  EXPECT_NEAR(e.cost[0], 0.0, 1e-10);
}

TEST(IpoGap, StaysWithinOneOverTOnARandomBindingInstance) {
  Rng rng = make_rng(4, "gap");
  const GapInstance inst = random_binding_gap_instance(rng);
  for (double t : {10.0, 50.0}) {
    const GapReport r = check_ipo_gap(inst, t, 1000);
    EXPECT_GE(r.gap, -r.tau_grid);
    EXPECT_LE(r.gap, 1.0 / t + r.tau_grid);
    EXPECT_TRUE(r.report.pass);
  }
}

TEST(IpoGap, RejectsLargerInstances) {
  GapInstance inst;
  Rng rng = make_rng(1, "gap");
  inst.spec = random_cmdp(rng, 3, 2, 1);
  inst.reference_probs = Matrix::Constant(3, 2, 0.5);
  EXPECT_THROW(gap_affine_terms(inst), std::invalid_argument);
}
