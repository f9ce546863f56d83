#pragma once

#include <cstdint>
#include <vector>

#include "acpo/budget.hpp"
#include "acpo/estimation.hpp"
#include "acpo/policy.hpp"

namespace acpo {

/// Which stage objective to build and the constants it needs.
struct StageObjective {
  StageKind kind = StageKind::MaxReward;
  Vector cost_budget;          ///< d^k (projection budget in the projection stage)
  double reward_budget = 0.0;  ///< g^k
  double barrier_t = 25.0;
  double barrier_cap = 25.0;   ///< largest barrier slope; also caps the barrier value
  double clip_ratio = 0.2;
  std::vector<int> active_costs;  ///< cost terms minimized in the min-cost stage
  bool use_barrier = true;        ///< false drops every barrier term

  /// Throws std::invalid_argument on out-of-range fields.
  void validate(int num_costs) const;
};

struct SurrogateValue {
  double objective = 0.0;
  double surrogate = 0.0;  ///< the part without barrier terms
  double barrier = 0.0;    ///< sum of barrier terms
  std::vector<double> barrier_arguments;
  bool domain_ok = true;   ///< false iff some barrier argument is >= 0
};

/// Log barrier log(-x)/t, continued linearly with slope -cap once its slope
/// would exceed cap in magnitude (that is for x > -1/(t cap), including the
/// infeasible half-line), and clamped above at cap.
double barrier_phi(double x, double t, double cap);
/// Derivative of barrier_phi with respect to x.
double barrier_slope(double x, double t, double cap);

/// Cost constraint surrogate Ĵ_C + H * mean(ratio * A_C) - budget over the
/// whole batch, with H = batch.discounted_steps_per_episode().
double surrogate_cost_constraint(const TrajectoryBatch& batch, const EstimateSet& est,
                                 const PolicyParams& params, double budget, int constraint);

SurrogateValue max_reward_objective(const TrajectoryBatch& batch, const EstimateSet& est,
                                    const PolicyParams& params, const StageObjective& obj);
/// Throws std::invalid_argument when obj.active_costs is empty: callers
/// skip the min-cost update instead.
SurrogateValue min_cost_objective(const TrajectoryBatch& batch, const EstimateSet& est,
                                  const PolicyParams& params, const StageObjective& obj);
SurrogateValue projection_objective(const TrajectoryBatch& batch, const EstimateSet& est,
                                    const PolicyParams& params, const PolicyParams& frozen,
                                    const StageObjective& obj);

/// Dispatches on obj.kind. `frozen` is required for the projection stage.
SurrogateValue stage_objective_value(const TrajectoryBatch& batch, const EstimateSet& est,
                                     const PolicyParams& params, const StageObjective& obj,
                                     const PolicyParams* frozen = nullptr);

/// Exact gradient of the stage objective with respect to the policy weights.
Matrix surrogate_gradient(const PolicyParams& params, const TrajectoryBatch& batch,
                          const EstimateSet& est, const StageObjective& obj,
                          const PolicyParams* frozen = nullptr);

/// Value and gradient over a subset of transitions (a minibatch).
struct ObjectiveEval {
  SurrogateValue value;
  Matrix weight_gradient;
};
ObjectiveEval evaluate_stage_objective(const PolicyParams& params, const TrajectoryBatch& batch,
                                       const EstimateSet& est, const StageObjective& obj,
                                       const PolicyParams* frozen,
                                       const std::vector<int>& indices, bool with_gradient);

/// KL(params || reference) averaged over the batch's states, one term per
/// transition.
double batch_kl(const PolicyParams& params, const PolicyParams& reference,
                const TrajectoryBatch& batch);

struct AscendConfig {
  int epochs = 40;
  int num_minibatches = 4;
  double learning_rate = 3e-4;
  double kl_stop = 0.02;
  /// Keep Adam moments across updates. Off by default: stage objectives differ
  /// in scale, and one barrier-dominated update would otherwise damp the step
  /// size for hundreds of later updates.
  bool persistent_moments = false;

  void validate() const;
};

/// One row of the per-update log.
struct UpdateLog {
  StageKind stage = StageKind::MaxReward;
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<double> barrier_arguments;  ///< at the accepted point
  bool domain_ok = true;
  double kl = 0.0;         ///< batch KL to the sampling policy after the update
  double grad_norm = 0.0;  ///< norm of the first full-batch gradient
  int epochs_run = 0;
  int steps = 0;
  bool early_stopped = false;
  bool aborted = false;       ///< non-finite gradient: update discarded
  bool kl_overshoot = false;  ///< final KL above twice kl_stop
};

struct AscendResult {
  PolicyParams params;
  UpdateLog log;
};

/// Adam ascent on the stage objective. `params` must be the policy the batch
/// was sampled from. Each epoch first checks the batch KL to it and stops
/// once that reaches kl_stop, then shuffles the batch with `rng` and takes
/// one step per minibatch.
AscendResult ascend(const PolicyParams& params, const TrajectoryBatch& batch,
                    const EstimateSet& est, const StageObjective& obj, const AscendConfig& cfg,
                    AdamState& adam, Rng& rng, const PolicyParams* frozen = nullptr);
/// Same with a fresh optimizer state.
AscendResult ascend(const PolicyParams& params, const TrajectoryBatch& batch,
                    const EstimateSet& est, const StageObjective& obj, const AscendConfig& cfg,
                    Rng& rng, const PolicyParams* frozen = nullptr);

}  // namespace acpo
