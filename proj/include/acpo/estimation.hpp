#pragma once

#include <cstdint>
#include <vector>

#include "acpo/budget.hpp"
#include "acpo/cmdp.hpp"
#include "acpo/policy.hpp"

namespace acpo {

/// Sampled transitions, stored column-wise.
struct TrajectoryBatch {
  std::vector<int> state;
  std::vector<int> action;
  std::vector<int> next_state;
  std::vector<double> reward;
  std::vector<std::vector<double>> cost;  ///< [constraint][transition]
  std::vector<double> old_log_prob;
  std::vector<int> episode_id;
  std::vector<int> step_index;
  /// Transition entered an absorbing state: no value is bootstrapped after it.
  std::vector<std::uint8_t> terminal;
  /// Last transition of an episode fragment (terminal, horizon, or batch end).
  std::vector<std::uint8_t> segment_end;

  /// Discounted returns sum_t gamma^t r_t of episodes completed in the batch.
  std::vector<double> episode_reward_returns;
  std::vector<std::vector<double>> episode_cost_returns;  ///< [constraint][episode]
  double discount = 0.99;  ///< discount used for the episode returns

  int size() const { return static_cast<int>(state.size()); }
  int num_costs() const { return static_cast<int>(cost.size()); }
  /// Sum of discount^step over the batch divided by the number of episodes
  /// started in it: converts a per-transition mean into a per-episode
  /// discounted total.
  double discounted_steps_per_episode() const;
  /// Throws std::invalid_argument if column lengths disagree.
  void validate() const;
};

/// Runs `params` in `spec` for exactly `num_transitions` steps, resetting
/// after every finished episode. With `workers` > 1 the budget is split into
/// contiguous chunks collected on separate threads from independent
/// substreams and concatenated in worker order.
TrajectoryBatch collect(const CmdpSpec& spec, const PolicyParams& params, int num_transitions,
                        std::uint64_t seed, int workers = 1);

/// Signal selector for GAE: -1 for reward, i >= 0 for cost i.
inline constexpr int kRewardSignal = -1;

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

/// Generalized advantage estimation over a batch, truncated at episode
/// fragment ends. Bootstraps with V(next_state) unless the transition is
/// terminal.
GaeResult gae(const TrajectoryBatch& batch, const Vector& values, double gamma, double lambda,
              int signal);

struct EstimatorConfig {
  double gamma = 0.99;
  double lambda_reward = 0.95;
  double lambda_cost = 0.95;
  int value_fit_epochs = 50;          ///< linear critics only
  double value_learning_rate = 0.1;   ///< linear critics only
  bool normalize_reward_advantages = true;
  /// Subtract the batch mean from cost advantages and from the raw reward
  /// advantages used inside barrier arguments (scale untouched).
  bool center_cost_advantages = true;

  void validate() const;
};

struct EstimateSet {
  std::vector<double> adv_reward;      ///< normalized when configured
  std::vector<double> adv_reward_raw;  ///< unscaled, used inside barrier arguments
  /// Divisor applied to the centered reward advantages (1 when unnormalized).
  double reward_scale = 1.0;
  std::vector<std::vector<double>> adv_cost;
  std::vector<double> value_targets_reward;
  std::vector<std::vector<double>> value_targets_cost;
  double episode_reward_return = 0.0;  ///< J_R estimate
  Vector episode_cost_returns;         ///< J_C estimate per constraint
};

/// Per-state value tables for the reward and each cost.
struct Critic {
  Vector reward;
  std::vector<Vector> cost;

  static Critic zeros(int num_states, int num_costs);
};

/// Episode-return estimates from a batch: mean discounted return of completed
/// episodes (falls back to all fragments if none completed).
double estimate_reward_return(const TrajectoryBatch& batch);
Vector estimate_cost_returns(const TrajectoryBatch& batch);

EstimateSet estimate(const TrajectoryBatch& batch, const Critic& critic,
                     const EstimatorConfig& cfg);

/// Tabular least squares: per-state mean of the targets. States without
/// samples keep their previous value.
Vector fit_values(const TrajectoryBatch& batch, const std::vector<double>& targets,
                  const Vector& previous);
/// Refits every table of `critic` from an estimate's value targets.
Critic fit_critic(const TrajectoryBatch& batch, const EstimateSet& est, const Critic& previous);

/// Linear critic V(s) = features.row(s) . w fitted by full-batch gradient
/// descent on the mean squared error.
Vector fit_values_linear(const Matrix& features, const std::vector<int>& states,
                         const std::vector<double>& targets, const Vector& initial_weights,
                         const EstimatorConfig& cfg);

/// Exact infinite-horizon evaluation of a stationary policy.
struct ExactEval {
  Vector v_reward;
  std::vector<Vector> v_cost;
  Matrix q_reward;               ///< S x A
  std::vector<Matrix> q_cost;    ///< S x A each
  Vector visitation;             ///< normalized discounted state visitation d_pi
  double j_reward = 0.0;
  Vector j_cost;

  Matrix advantage_reward() const;
  Matrix advantage_cost(int i) const;
};

ExactEval exact_eval(const CmdpSpec& spec, const PolicyParams& params);
/// Same, for an explicit S x A probability table.
ExactEval exact_eval(const CmdpSpec& spec, const Matrix& probs);

/// Pushes the estimate's returns into the queues.
void update_queues(BudgetState& state, const EstimateSet& est);

}  // namespace acpo
