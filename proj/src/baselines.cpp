#include "acpo/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace acpo {

LagrangeState LagrangeState::initial(int num_costs, double init, double lr, double upper_bound) {
  if (num_costs < 1) throw std::invalid_argument("need at least one constraint");
  if (!(upper_bound > 0.0) || !(init >= 0.0) || init > upper_bound) {
    throw std::invalid_argument("lagrange init must lie in [0, upper_bound]");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("lagrange lr must be positive");
  LagrangeState s;
  s.multipliers = Vector::Constant(num_costs, init);
  s.lr = lr;
  s.upper_bound = upper_bound;
  return s;
}

std::string to_string(ScheduleShape shape) {
  return shape == ScheduleShape::Linear ? "linear" : "exponential";
}

ScheduleShape schedule_shape_from_string(const std::string& name) {
  if (name == "linear") return ScheduleShape::Linear;
  if (name == "exponential") return ScheduleShape::Exponential;
  throw std::invalid_argument("unknown schedule shape: " + name);
}

void CurriculumSchedule::validate() const {
  if (d_init.size() == 0 || d_init.size() != d_final.size()) {
    throw std::invalid_argument("curriculum budgets must be non-empty and equally long");
  }
  if (decay_iters < 1) throw std::invalid_argument("decay_iters must be >= 1");
  for (int i = 0; i < d_init.size(); ++i) {
    if (!(d_final[i] >= 0.0) || !(d_init[i] >= d_final[i])) {
      throw std::invalid_argument("curriculum needs d_init >= d_final >= 0");
    }
  }
}

Vector curriculum_budget(const CurriculumSchedule& schedule, int iter) {
  schedule.validate();
  if (iter < 0) throw std::invalid_argument("iteration must be >= 0");
  const double u = std::min(1.0, static_cast<double>(iter) / schedule.decay_iters);
  double frac = u;
  if (schedule.shape == ScheduleShape::Exponential) {
    frac = u >= 1.0 ? 1.0 : (1.0 - std::exp(-5.0 * u)) / (1.0 - std::exp(-5.0));
  }
  return schedule.d_init + frac * (schedule.d_final - schedule.d_init);
}

namespace {

StageObjective base_objective(const BaselineStepConfig& cfg, int num_costs) {
  StageObjective obj;
  obj.barrier_t = cfg.barrier_t;
  obj.barrier_cap = cfg.barrier_cap;
  obj.clip_ratio = cfg.clip_ratio;
  obj.cost_budget = Vector::Zero(num_costs);
  return obj;
}

}  // namespace

AscendResult ipo_step(const PolicyParams& params, const TrajectoryBatch& batch,
                      const EstimateSet& est, const Vector& d_fixed,
                      const BaselineStepConfig& cfg, AdamState& adam, Rng& rng) {
  StageObjective obj = base_objective(cfg, batch.num_costs());
  obj.kind = StageKind::MaxReward;
  obj.cost_budget = d_fixed;
  return ascend(params, batch, est, obj, cfg.ascend, adam, rng);
}

LagrangeStepResult ppo_lag_step(const PolicyParams& params, const LagrangeState& lag,
                                const TrajectoryBatch& batch, const EstimateSet& est,
                                const Vector& d_des, const BaselineStepConfig& cfg,
                                AdamState& adam, Rng& rng) {
  const int m = batch.num_costs();
  if (lag.multipliers.size() != m || d_des.size() != m) {
    throw std::invalid_argument("multiplier count does not match the constraints");
  }
  if ((lag.multipliers.array() < 0.0).any() ||
      (lag.multipliers.array() > lag.upper_bound).any()) {
    throw std::invalid_argument("multipliers outside [0, upper_bound]");
  }
  EstimateSet combined = est;
  const double norm = 1.0 + lag.multipliers.sum();
  for (int j = 0; j < batch.size(); ++j) {
    double a = est.adv_reward[j];
    for (int i = 0; i < m; ++i) a -= lag.multipliers[i] * est.adv_cost[i][j];
    combined.adv_reward[j] = a / norm;
  }
  StageObjective obj = base_objective(cfg, m);
  obj.kind = StageKind::MaxReward;
  obj.use_barrier = false;

  LagrangeStepResult out{ascend(params, batch, combined, obj, cfg.ascend, adam, rng), lag};
  for (int i = 0; i < m; ++i) {
    const double step = lag.lr * (est.episode_cost_returns[i] - d_des[i]);
    out.lagrange.multipliers[i] = std::clamp(lag.multipliers[i] + step, 0.0, lag.upper_bound);
  }
  return out;
}

CrpoStepResult crpo_step(const PolicyParams& params, const TrajectoryBatch& batch,
                         const EstimateSet& est, const Vector& d_des, double tol_eta,
                         const BaselineStepConfig& cfg, AdamState& adam, Rng& rng) {
  if (!(tol_eta >= 0.0)) throw std::invalid_argument("tol_eta must be >= 0");
  const int m = batch.num_costs();
  if (d_des.size() != m) throw std::invalid_argument("budget count does not match");
  StageObjective obj = base_objective(cfg, m);
  obj.use_barrier = false;
  CrpoStepResult out;
  for (int i = 0; i < m; ++i) {
    if (est.episode_cost_returns[i] > d_des[i] + tol_eta) {
      out.corrected_constraint = i;
      break;
    }
  }
  if (out.corrected_constraint >= 0) {
    obj.kind = StageKind::MinCost;
    obj.active_costs = {out.corrected_constraint};
  } else {
    obj.kind = StageKind::MaxReward;
  }
  out.update = ascend(params, batch, est, obj, cfg.ascend, adam, rng);
  return out;
}

}  // namespace acpo
