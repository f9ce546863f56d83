#pragma once

#include <optional>
#include <string>
#include <vector>

#include "acpo/budget.hpp"

namespace acpo {

/// Stage lengths, budget feedback and convergence settings of the adaptive
/// scheduler.
struct StageConfig {
  int n1 = 10;   ///< max-reward updates before switching to min-cost
  int n2 = 5;    ///< min-cost updates before switching back
  int n_e = 20;  ///< exploration prefix: no budget logic before this iteration
  double k_p = 0.5;
  /// Gain of the enlarge branch; k_p when unset.
  std::optional<double> enlarge_gain;
  Vector d0;
  Vector desired;
  double finish_tol = 0.05;  ///< tolerance on |mean(D_C_i) - d_des_i|
  int converge_window = 10;
  double converge_rel_tol = 0.02;
  int queue_capacity = 10;
  /// Restart from the initial policy after leaving the projection stage.
  bool reset_policy_on_projection = false;

  /// Throws std::invalid_argument listing the first violated invariant.
  void validate() const;
};

/// True iff the queue holds at least `window` entries and the population
/// standard deviation of the newest `window` of them is at most
/// rel_tol * (1 + |their mean|).
bool converged(const ReturnQueue& queue, int window, double rel_tol);

/// Proportional budget shift k_p * (d_des - d_old).
double projection_delta(double d_old, double d_des, double k_p);

enum class BudgetEvent {
  None,
  Explore,         ///< inside the exploration prefix
  Finish,          ///< converged at the desired budget
  Project,         ///< converged above the desired budget: tighten and project
  Enlarge,         ///< converged below the desired budget: loosen
  ProjectionExit,  ///< projection converged under the new budget
  ToMinCost,
  MinCostSkipped,  ///< max-reward stage ended with every constraint satisfied
  ToMaxReward,
};

std::string to_string(BudgetEvent event);

struct BudgetUpdate {
  bool terminate = false;
  BudgetEvent event = BudgetEvent::None;
};

/// Constraints whose queued mean cost exceeds the desired budget.
std::vector<int> violating_costs(const BudgetState& state);

/// One step of the budget state machine, applied componentwise over
/// constraints. Runs before the iteration's policy update.
BudgetUpdate update_budgets(BudgetState& state, const StageConfig& cfg);

}  // namespace acpo
