#include <gtest/gtest.h>

#include "acpo/cmdp.hpp"
#include "acpo/gridworld.hpp"

using namespace acpo;

namespace {

CmdpSpec two_state_chain() {
  CmdpSpec spec = make_empty_spec(2, 2, 1, 0.9, 50);
  // Action 0 stays, action 1 switches.
  for (int s = 0; s < 2; ++s) {
    spec.p(s, 0, s) = 1.0;
    spec.p(s, 1, 1 - s) = 1.0;
  }
  spec.reward(1, 0) = 1.0;
  spec.costs[0](0, 1) = 0.5;
  spec.initial_dist << 1.0, 0.0;
  return spec;
}

}  // namespace

TEST(CmdpSpec, AcceptsWellFormedSpec) { EXPECT_NO_THROW(two_state_chain().validate()); }

TEST(CmdpSpec, RejectsRowsThatDoNotSumToOne) {
  CmdpSpec spec = two_state_chain();
  spec.p(0, 0, 0) = 0.7;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(CmdpSpec, RejectsBadDiscountAndInitialDistribution) {
  CmdpSpec spec = two_state_chain();
  spec.discount = 1.0;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = two_state_chain();
  spec.initial_dist << 0.5, 0.2;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(CmdpSpec, RejectsNonFiniteRewards) {
  CmdpSpec spec = two_state_chain();
  spec.reward(0, 0) = std::nan("");
  EXPECT_THROW(spec.validate(), std::exception);
}

TEST(Episode, FollowsDeterministicTransitionsAndReportsSignals) {
  const CmdpSpec spec = two_state_chain();
  EnvState env = reset(spec, make_rng(1, "env"));
  EXPECT_EQ(env.state_index, 0);
  StepResult r = step(spec, env, 1);
  EXPECT_EQ(env.state_index, 1);
  EXPECT_DOUBLE_EQ(r.costs[0], 0.5);
  r = step(spec, env, 0);
  EXPECT_DOUBLE_EQ(r.reward, 1.0);
  EXPECT_FALSE(r.done);
}

TEST(Episode, EndsAtHorizonAndRefusesFurtherSteps) {
  CmdpSpec spec = two_state_chain();
  spec.horizon = 3;
  EnvState env = reset(spec, make_rng(1, "env"));
  StepResult r;
  for (int k = 0; k < 3; ++k) r = step(spec, env, 0);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.terminal);
  EXPECT_THROW(step(spec, env, 0), StateError);
}

TEST(Episode, RejectsOutOfRangeAction) {
  const CmdpSpec spec = two_state_chain();
  EnvState env = reset(spec, make_rng(1, "env"));
  EXPECT_THROW(step(spec, env, 2), std::invalid_argument);
}

TEST(CmdpSpec, JsonRoundTripPreservesEverything) {
  const CmdpSpec spec = build_gridworld("two-cost", 5, 0);
  const CmdpSpec back = spec_from_json(to_json(spec));
  EXPECT_EQ(back.num_states, spec.num_states);
  EXPECT_EQ(back.transition, spec.transition);
  EXPECT_TRUE(back.reward == spec.reward);
  ASSERT_EQ(back.num_costs(), 2);
  EXPECT_TRUE(back.costs[1] == spec.costs[1]);
  EXPECT_TRUE(back.initial_dist == spec.initial_dist);
}

TEST(CostShaping, IsZeroInsideAndOneFarOutside) {
  CostShapingSpec sh;
  sh.upper_bound = 1.0;
  sh.smoothing = 0.01;
  EXPECT_NEAR(shape_cost(0.0, sh), 0.0, 1e-12);
  EXPECT_NEAR(shape_cost(2.0, sh), 1.0, 1e-12);
  EXPECT_NEAR(shape_cost(1.0, sh), 0.5, 1e-12);
}

class GridworldFamily : public ::testing::TestWithParam<std::string> {};

TEST_P(GridworldFamily, BuildsValidSpecWithAbsorbingTerminal) {
  const CmdpSpec spec = build_gridworld(GetParam(), 5, 0);
  EXPECT_NO_THROW(spec.validate());
  EXPECT_EQ(spec.num_states, 26);
  EXPECT_EQ(spec.num_actions, 4);
  EXPECT_TRUE(spec.is_absorbing(gridworld_terminal(5)));
  EXPECT_EQ(spec.num_costs(), GetParam() == "two-cost" ? 2 : 1);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GridworldFamily,
                         ::testing::Values("hazard-goal", "trap", "two-cost"));

TEST(Gridworld, RejectsUnknownKindAndTinyGrid) {
  EXPECT_THROW(build_gridworld("maze", 5, 0), std::invalid_argument);
  EXPECT_THROW(build_gridworld("trap", 2, 0), std::invalid_argument);
}
