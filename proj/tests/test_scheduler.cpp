#include <gtest/gtest.h>

#include "acpo/scheduler.hpp"

using namespace acpo;

namespace {

StageConfig config(int m) {
  StageConfig c;
  c.d0 = Vector::Constant(m, 10.0);
  c.desired = Vector::Constant(m, 1.0);
  c.n_e = 2;
  return c;
}

// Puts the state past exploration with queues holding constant returns.
BudgetState steady(const StageConfig& c, double reward, const Vector& costs, int entries) {
  BudgetState st = BudgetState::initial(c.d0, c.desired, c.queue_capacity);
  st.global_iter = c.n_e;
  for (int k = 0; k < entries; ++k) {
    st.queue_reward.push(reward);
    for (int i = 0; i < costs.size(); ++i) st.queue_cost[i].push(costs[i]);
  }
  return st;
}

}  // namespace

TEST(ReturnQueue, EvictsOldestAndReportsMoments) {
  ReturnQueue q(3);
  EXPECT_FALSE(q.mean().has_value());
  for (double v : {1.0, 2.0, 3.0, 4.0}) q.push(v);
  EXPECT_EQ(q.size(), 3);
  EXPECT_DOUBLE_EQ(*q.mean(), 3.0);
  EXPECT_NEAR(*q.stddev(), std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(Converged, UsesTheNewestWindowOnly) {
  ReturnQueue q(10);
  q.push(100.0);
  for (int k = 0; k < 4; ++k) q.push(5.0);
  EXPECT_TRUE(converged(q, 4, 0.01));
  EXPECT_FALSE(converged(q, 5, 0.01));
  EXPECT_FALSE(converged(q, 6, 0.01));
}

TEST(StageConfig, ValidateRejectsInconsistentSettings) {
  StageConfig c = config(1);
  EXPECT_NO_THROW(c.validate());
  c.d0[0] = 0.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config(1);
  c.converge_window = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config(1);
  c.queue_capacity = 5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(UpdateBudgets, ExploresBeforeTheBudgetLogicStarts) {
  const StageConfig c = config(1);
  BudgetState st = steady(c, 1.0, Vector::Constant(1, 5.0), 10);
  st.global_iter = 1;
  const BudgetUpdate u = update_budgets(st, c);
  EXPECT_EQ(u.event, BudgetEvent::Explore);
  EXPECT_DOUBLE_EQ(st.cost_budget[0], 10.0);
}

TEST(UpdateBudgets, FinishesWhenConvergedAtTheDesiredBudget) {
  const StageConfig c = config(1);
  BudgetState st = steady(c, 2.0, Vector::Constant(1, 1.03), 10);
  const BudgetUpdate u = update_budgets(st, c);
  EXPECT_TRUE(u.terminate);
  EXPECT_EQ(u.event, BudgetEvent::Finish);
}

TEST(UpdateBudgets, ProjectsProportionallyWhenConvergedAboveTheDesiredBudget) {
  const StageConfig c = config(1);
  BudgetState st = steady(c, 2.0, Vector::Constant(1, 3.0), 10);
  st.cost_budget[0] = 4.0;
  const BudgetUpdate u = update_budgets(st, c);
  EXPECT_EQ(u.event, BudgetEvent::Project);
  EXPECT_EQ(st.stage, StageKind::Projection);
  EXPECT_DOUBLE_EQ(st.cost_budget[0], 4.0 + 0.5 * (1.0 - 3.0));
  EXPECT_EQ(st.queue_reward.size(), 0);
  EXPECT_FALSE(u.terminate);
}

TEST(UpdateBudgets, EnlargesWhenConvergedBelowTheDesiredBudget) {
  StageConfig c = config(1);
  c.enlarge_gain = 0.25;
  BudgetState st = steady(c, 2.0, Vector::Constant(1, 0.2), 10);
  st.cost_budget[0] = 0.6;
  EXPECT_EQ(update_budgets(st, c).event, BudgetEvent::Enlarge);
  EXPECT_DOUBLE_EQ(st.cost_budget[0], 0.6 + 0.25 * (1.0 - 0.2));
}

TEST(UpdateBudgets, LeavesProjectionOnceConverged) {
  const StageConfig c = config(1);
  BudgetState st = steady(c, 2.0, Vector::Constant(1, 3.0), 10);
  st.stage = StageKind::Projection;
  EXPECT_EQ(update_budgets(st, c).event, BudgetEvent::ProjectionExit);
  EXPECT_EQ(st.stage, StageKind::MaxReward);
}

TEST(UpdateBudgets, AlternatesStagesAndSkipsMinCostWhenFeasible) {
  const StageConfig c = config(2);
  // Not converged: returns still moving.
  BudgetState st = BudgetState::initial(c.d0, c.desired, c.queue_capacity);
  st.global_iter = c.n_e;
  for (int k = 0; k < 4; ++k) {
    st.queue_reward.push(k);
    st.queue_cost[0].push(0.5 + 0.1 * k);
    st.queue_cost[1].push(0.2 * k);
  }
  st.iter_in_stage = c.n1;
  // Means 0.65 and 0.3 are both under the desired 1.0.
  BudgetUpdate u = update_budgets(st, c);
  EXPECT_EQ(u.event, BudgetEvent::MinCostSkipped);
  EXPECT_EQ(st.stage, StageKind::MaxReward);
  EXPECT_DOUBLE_EQ(st.reward_budget, 1.5);

  st.queue_cost[1].push(5.0);
  st.iter_in_stage = c.n1;
  u = update_budgets(st, c);
  EXPECT_EQ(u.event, BudgetEvent::ToMinCost);
  EXPECT_EQ(violating_costs(st), std::vector<int>{1});

  st.iter_in_stage = c.n2;
  u = update_budgets(st, c);
  EXPECT_EQ(u.event, BudgetEvent::ToMaxReward);
  EXPECT_DOUBLE_EQ(st.cost_budget[0], *st.queue_cost[0].mean());
  EXPECT_DOUBLE_EQ(st.cost_budget[1], *st.queue_cost[1].mean());
}

TEST(UpdateBudgets, RejectsMismatchedConstraintCounts) {
  const StageConfig c = config(1);
  BudgetState st = BudgetState::initial(c.d0, c.desired, c.queue_capacity);
  st.global_iter = c.n_e;
  st.desired = Vector::Constant(2, 1.0);
  EXPECT_THROW(update_budgets(st, c), std::invalid_argument);
}
