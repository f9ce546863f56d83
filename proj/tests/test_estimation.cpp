#include <gtest/gtest.h>

#include "acpo/estimation.hpp"
#include "acpo/gridworld.hpp"

using namespace acpo;

namespace {

// Three transitions: a two-step episode ending in a terminal state, then one
// step cut by the end of the batch.
TrajectoryBatch hand_batch() {
  TrajectoryBatch b;
  b.state = {0, 1, 0};
  b.action = {0, 0, 0};
  b.next_state = {1, 2, 1};
  b.reward = {1.0, 2.0, 3.0};
  b.cost = {{0.5, 0.0, 1.0}};
  b.old_log_prob = {0.0, 0.0, 0.0};
  b.episode_id = {0, 0, 1};
  b.step_index = {0, 1, 0};
  b.terminal = {0, 1, 0};
  b.segment_end = {0, 1, 1};
  b.episode_reward_returns = {1.0 + 0.9 * 2.0};
  b.episode_cost_returns = {{0.5}};
  b.discount = 0.9;
  return b;
}

}  // namespace

TEST(Gae, MatchesHandComputedRecursion) {
  const TrajectoryBatch b = hand_batch();
  const Vector v{{0.5, 1.0, 7.0}};
  const double g = 0.9, l = 0.8;
  const GaeResult r = gae(b, v, g, l, kRewardSignal);
  // Last fragment bootstraps from V(next) at the cut.
  const double d2 = 3.0 + g * 1.0 - 0.5;
  // Terminal transition ignores V(next).
  const double d1 = 2.0 - 1.0;
  const double d0 = 1.0 + g * 1.0 - 0.5;
  EXPECT_NEAR(r.advantages[2], d2, 1e-14);
  EXPECT_NEAR(r.advantages[1], d1, 1e-14);
  EXPECT_NEAR(r.advantages[0], d0 + g * l * d1, 1e-14);
  EXPECT_NEAR(r.value_targets[0], r.advantages[0] + 0.5, 1e-14);
}

TEST(Gae, LambdaOneGivesDiscountedReturnMinusValue) {
  const TrajectoryBatch b = hand_batch();
  const Vector v{{0.3, -0.2, 0.0}};
  const GaeResult r = gae(b, v, 0.9, 1.0, 0);
  EXPECT_NEAR(r.advantages[0], 0.5 + 0.9 * 0.0 - 0.3, 1e-14);
}

TEST(Gae, RejectsBadSignalIndex) {
  EXPECT_THROW(gae(hand_batch(), Vector::Zero(3), 0.9, 0.9, 1), std::invalid_argument);
}

TEST(Estimate, NormalizesRewardAdvantagesAndRecordsScale) {
  const CmdpSpec spec = build_gridworld("hazard-goal", 5, 0);
  const PolicyParams p = PolicyParams::tabular(spec.num_states, spec.num_actions);
  const TrajectoryBatch b = collect(spec, p, 2000, 3);
  EstimatorConfig cfg;
  cfg.gamma = spec.discount;
  const EstimateSet est = estimate(b, Critic::zeros(spec.num_states, 1), cfg);
  double mean = 0.0, sq = 0.0;
  for (double a : est.adv_reward) mean += a;
  mean /= est.adv_reward.size();
  for (double a : est.adv_reward) sq += (a - mean) * (a - mean);
  EXPECT_NEAR(mean, 0.0, 1e-10);
  EXPECT_NEAR(std::sqrt(sq / est.adv_reward.size()), 1.0, 1e-6);
  EXPECT_GT(est.reward_scale, 0.0);
}

TEST(Collect, IsDeterministicPerSeedAndWorkerCount) {
  const CmdpSpec spec = build_gridworld("trap", 5, 0);
  const PolicyParams p = PolicyParams::tabular(spec.num_states, spec.num_actions);
  const TrajectoryBatch a = collect(spec, p, 1500, 11, 3);
  const TrajectoryBatch b = collect(spec, p, 1500, 11, 3);
  const TrajectoryBatch c = collect(spec, p, 1500, 12, 3);
  EXPECT_EQ(a.size(), 1500);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.action, b.action);
  EXPECT_EQ(a.reward, b.reward);
  EXPECT_NE(a.action, c.action);
  EXPECT_NO_THROW(a.validate());
}

TEST(ExactEval, MatchesIteratedBellmanBackups) {
  const CmdpSpec spec = build_gridworld("two-cost", 5, 0);
  PolicyParams p = PolicyParams::tabular(spec.num_states, spec.num_actions);
  Rng rng = make_rng(5, "weights");
  std::normal_distribution<double> n01;
  for (int s = 0; s < p.weights().rows(); ++s)
    for (int a = 0; a < p.weights().cols(); ++a) p.weights()(s, a) = n01(rng);
  const Matrix pi = p.prob_table();
  const ExactEval ex = exact_eval(spec, p);

  const int S = spec.num_states, A = spec.num_actions;
  auto iterate = [&](const Matrix& r) {
    Vector v = Vector::Zero(S);
    for (int it = 0; it < 6000; ++it) {
      Vector next = Vector::Zero(S);
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          double q = r(s, a);
          for (int s2 = 0; s2 < S; ++s2) q += spec.discount * spec.p(s, a, s2) * v[s2];
          next[s] += pi(s, a) * q;
        }
      v = next;
    }
    return v;
  };
  const Vector vr = iterate(spec.reward);
  EXPECT_LT((vr - ex.v_reward).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(ex.j_reward, spec.initial_dist.dot(vr), 1e-8);
  for (int i = 0; i < 2; ++i) {
    const Vector vc = iterate(spec.costs[i]);
    EXPECT_NEAR(ex.j_cost[i], spec.initial_dist.dot(vc), 1e-8);
  }
  EXPECT_NEAR(ex.visitation.sum(), 1.0, 1e-10);
  EXPECT_GE(ex.visitation.minCoeff(), 0.0);
}

TEST(FitValues, AveragesTargetsPerVisitedState) {
  const TrajectoryBatch b = hand_batch();
  const Vector prev{{0.0, 0.0, 9.0}};
  const Vector v = fit_values(b, {1.0, 2.0, 3.0}, prev);
  EXPECT_DOUBLE_EQ(v[0], 2.0);
  EXPECT_DOUBLE_EQ(v[1], 2.0);
  EXPECT_DOUBLE_EQ(v[2], 9.0);
}
