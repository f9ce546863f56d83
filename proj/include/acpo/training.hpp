#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acpo/baselines.hpp"
#include "acpo/cmdp.hpp"
#include "acpo/estimation.hpp"
#include "acpo/scheduler.hpp"
#include "acpo/stage_objective.hpp"

namespace acpo {

/// Everything one training run needs besides the CMDP and the seed.
struct TrainConfig {
  std::string algorithm = "acpo";  ///< acpo | ipo | ipo-c | ppo-lag | crpo
  StageConfig stage;
  EstimatorConfig estimator;
  AscendConfig optimizer;
  double barrier_t = 25.0;
  double barrier_cap = 25.0;
  double clip_ratio = 0.2;
  Parameterization policy_class = Parameterization::TabularSoftmax;
  int batch_size = 20000;
  int num_iterations = 500;
  int workers = 1;

  double lagrange_lr = 0.035;
  double lagrange_init = 1e-3;
  double lagrange_upper_bound = 1000.0;
  double crpo_tol = 0.0;
  int curriculum_decay_iters = 100;
  ScheduleShape curriculum_shape = ScheduleShape::Linear;

  void validate(int num_costs) const;
};

/// Per-iteration trace row.
struct IterationRecord {
  int iter = 0;
  StageKind stage = StageKind::MaxReward;  ///< objective actually optimized
  StageKind flag = StageKind::MaxReward;   ///< scheduler stage flag
  bool min_cost_skipped = false;
  std::string event;
  double j_reward_hat = 0.0;
  Vector j_cost_hat;
  /// Queued mean cost the scheduler decided on (adaptive runs only).
  Vector queue_cost_mean;
  Vector cost_budget;   ///< budget the update used
  double reward_budget = 0.0;
  double kl = 0.0;
  double objective = 0.0;
  double exact_j_reward = 0.0;  ///< of the policy after the update
  Vector exact_j_cost;
  Vector multipliers;  ///< Lagrange multipliers (ppo-lag only)
  int segment = 0;     ///< increments whenever a stage ends
  bool updated = false;
  double wall_ms = 0.0;
};

struct RunResult {
  std::string algorithm;
  PolicyParams final_params;
  std::vector<IterationRecord> records;
  std::vector<UpdateLog> updates;        ///< one per record
  std::vector<PolicyParams> policies;    ///< policies[0] initial, policies[k+1] after record k
  BudgetState final_state;
  bool terminated = false;
};

/// Initial policy for a spec: all-zero weights (uniform actions). Linear
/// policies use one-hot state features.
PolicyParams initial_policy(const CmdpSpec& spec, Parameterization kind);

RunResult run_acpo(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed);
RunResult run_ipo(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed);
RunResult run_ipo_c(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed);
RunResult run_ppo_lag(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed);
RunResult run_crpo(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed);
/// Dispatches on cfg.algorithm.
RunResult run_algorithm(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed);

}  // namespace acpo
