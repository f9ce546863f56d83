#pragma once

#include <string>

#include "acpo/stage_objective.hpp"

namespace acpo {

/// Lagrange multipliers for the PPO-Lagrangian baseline.
struct LagrangeState {
  Vector multipliers;
  double lr = 0.035;
  double upper_bound = 1000.0;

  static LagrangeState initial(int num_costs, double init, double lr, double upper_bound);
};

enum class ScheduleShape { Linear, Exponential };

std::string to_string(ScheduleShape shape);
ScheduleShape schedule_shape_from_string(const std::string& name);

/// Budget curriculum moving from d_init to d_final over decay_iters iterations.
struct CurriculumSchedule {
  Vector d_init;
  Vector d_final;
  int decay_iters = 100;
  ScheduleShape shape = ScheduleShape::Linear;

  void validate() const;
};

/// Budget at iteration `iter`. The exponential shape covers the fraction
/// (1 - e^{-5 u}) / (1 - e^{-5}) of the distance at progress u.
Vector curriculum_budget(const CurriculumSchedule& schedule, int iter);

/// Settings shared by the baseline updates.
struct BaselineStepConfig {
  AscendConfig ascend;
  double barrier_t = 25.0;
  double barrier_cap = 25.0;
  double clip_ratio = 0.2;
};

/// Max-reward update with a fixed budget: the same objective and optimizer
/// as the adaptive scheduler's max-reward stage.
AscendResult ipo_step(const PolicyParams& params, const TrajectoryBatch& batch,
                      const EstimateSet& est, const Vector& d_fixed,
                      const BaselineStepConfig& cfg, AdamState& adam, Rng& rng);

struct LagrangeStepResult {
  AscendResult update;
  LagrangeState lagrange;
};

/// Clipped surrogate on (Â_R - sum_i lambda_i A_C_i) / (1 + sum_i lambda_i),
/// then lambda_i <- clamp(lambda_i + lr (Ĵ_C_i - d_des_i), 0, upper_bound).
LagrangeStepResult ppo_lag_step(const PolicyParams& params, const LagrangeState& lag,
                                const TrajectoryBatch& batch, const EstimateSet& est,
                                const Vector& d_des, const BaselineStepConfig& cfg,
                                AdamState& adam, Rng& rng);

struct CrpoStepResult {
  AscendResult update;
  int corrected_constraint = -1;  ///< -1 for a reward step
};

/// Cost step on the lowest-index constraint with Ĵ_C_i > d_des_i + tol_eta,
/// reward step otherwise. No barrier terms.
CrpoStepResult crpo_step(const PolicyParams& params, const TrajectoryBatch& batch,
                         const EstimateSet& est, const Vector& d_des, double tol_eta,
                         const BaselineStepConfig& cfg, AdamState& adam, Rng& rng);

}  // namespace acpo
