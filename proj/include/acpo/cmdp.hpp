#pragma once

#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "acpo/common.hpp"

namespace acpo {

/// Finite constrained MDP. Immutable after construction; safe to share
/// between threads.
struct CmdpSpec {
  int num_states = 0;
  int num_actions = 0;
  /// Row-major (s, a, s') tensor of size S*A*S.
  std::vector<double> transition;
  Matrix reward;              ///< S x A
  std::vector<Matrix> costs;  ///< m tensors, each S x A
  Vector initial_dist;        ///< length S
  double discount = 0.99;
  int horizon = 200;

  int num_costs() const { return static_cast<int>(costs.size()); }

  double p(int s, int a, int next) const {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  double& p(int s, int a, int next) {
    return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + next];
  }
  /// Pointer to the next-state distribution of (s, a).
  const double* row(int s, int a) const {
    return transition.data() + (static_cast<std::size_t>(s) * num_actions + a) * num_states;
  }

  /// A zero-signal trap: every action loops back with probability one and
  /// earns no reward or cost. Entering one ends a sampled episode since
  /// nothing further can be collected.
  bool is_absorbing(int s) const;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

/// Allocates a spec with zeroed tensors of the right shapes.
CmdpSpec make_empty_spec(int num_states, int num_actions, int num_costs, double discount,
                         int horizon);

struct EnvState {
  int state_index = 0;
  int steps_elapsed = 0;
  bool done = false;
  Rng rng;
};

struct StepResult {
  double reward = 0.0;
  std::vector<double> costs;
  bool done = false;
  /// True when the episode ended by entering an absorbing state (no bootstrap).
  bool terminal = false;
};

/// Starts an episode: draws the initial state from `initial_dist`.
EnvState reset(const CmdpSpec& spec, Rng rng);
/// Re-draws the initial state in place, keeping the generator stream.
void reset_in_place(const CmdpSpec& spec, EnvState& env);

/// Advances `env` by one transition.
StepResult step(const CmdpSpec& spec, EnvState& env, int action);

// ---------------------------------------------------------------------------
// Cost shaping

struct CostShapingSpec {
  double lower_bound = -std::numeric_limits<double>::infinity();
  double upper_bound = std::numeric_limits<double>::infinity();
  double smoothing = 1.0;

  void validate() const;
};

/// Two-sided erf barrier: an upper-boundary term (1 + erf((c - b_r)/sigma))/2
/// plus its mirror at b_l. An infinite bound disables its term.
double shape_cost(double c, const CostShapingSpec& shaping);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const CmdpSpec& spec);
CmdpSpec spec_from_json(const nlohmann::json& j);

}  // namespace acpo
