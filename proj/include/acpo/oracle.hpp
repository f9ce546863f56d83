#pragma once

#include <string>
#include <vector>

#include "acpo/cmdp.hpp"
#include "acpo/estimation.hpp"
#include "acpo/policy.hpp"
#include "acpo/scheduler.hpp"
#include "acpo/simplex.hpp"
#include "acpo/training.hpp"

#include "json.hpp"

namespace acpo {

/// Exact constrained optimum over stationary policies.
struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double j_star = 0.0;
  Matrix policy;     ///< S x A; uniform on states the optimum never visits
  Matrix occupancy;  ///< normalized discounted occupancy mu(s, a)
  Vector j_cost;

  bool feasible() const { return status == LpStatus::Optimal; }
};

/// Maximizes J_R subject to J_C_i <= d_i via the occupancy-measure LP.
LpSolution lp_solve(const CmdpSpec& spec, const Vector& d);

struct FrontPoint {
  Vector budget;
  bool feasible = false;
  double j_star = 0.0;
  Vector j_cost;
};

/// lp_solve over budgets sorted componentwise ascending.
std::vector<FrontPoint> pareto_front(const CmdpSpec& spec, const std::vector<Vector>& budgets);

struct Epsilons {
  double reward = 0.0;
  Vector cost;
};

/// max_s |sum_a pi_next(a|s) A^{pi_prev}(s,a)| for the reward and every cost.
Epsilons epsilons(const CmdpSpec& spec, const PolicyParams& pi_prev, const PolicyParams& pi_next);
Epsilons epsilons(const CmdpSpec& spec, const Matrix& prev_probs, const Matrix& next_probs);

struct BoundReport {
  std::string name;
  std::string context;
  double eps_reward = 0.0;
  Vector eps_cost;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool pass = true;
  bool skipped = false;
  std::string reason;

  /// Sets slack and verdict for an inequality lhs <= rhs.
  void settle();
};

nlohmann::json to_json(const BoundReport& r);

/// Both directions of the policy performance-difference bound, for the reward
/// and each cost, using exact values, visitation, KL and epsilon.
std::vector<BoundReport> check_performance_bound(const CmdpSpec& spec, const Matrix& old_probs,
                                                 const Matrix& new_probs);
std::vector<BoundReport> check_performance_bound(const CmdpSpec& spec,
                                                 const PolicyParams& pi_old,
                                                 const PolicyParams& pi_new);

struct BudgetBoundConfig {
  int n1 = 10;
  int n2 = 5;
  double barrier_t = 25.0;
  /// Trust-region radius for the configured-radius reports; <= 0 skips them.
  double configured_delta = 0.02;
};

/// Stage-pair update bounds on a recorded run: reward values at the ends of
/// consecutive max-reward stages may drop by at most
/// n1/((1-gamma)t) + sqrt(2 delta) gamma/(1-gamma)^2 (n1+n2) eps_R, and cost
/// values at the ends of consecutive min-cost stages may rise by at most the
/// analogous amount with eps_C. n1, n2 count the updates actually made in
/// each span, epsilons are running maxima over exact per-update values and
/// delta is the measured maximum exact KL of a single update.
std::vector<BoundReport> check_theorem_budget_bounds(const CmdpSpec& spec, const RunResult& run,
                                                     const BudgetBoundConfig& cfg);

/// Instance for the barrier optimality-gap check: a CMDP plus the reference
/// policy whose advantages define the per-step problem.
struct GapInstance {
  CmdpSpec spec;
  Matrix reference_probs;
  double budget = 0.0;
};

/// The per-step problem of an instance is affine in p_s, the probability of
/// action 0 at state s: objective f0 + fs.p, constraint h0 + hs.p <= 0.
struct GapAffine {
  double f0 = 0.0;
  double h0 = 0.0;
  Vector fs;
  Vector hs;
};

/// Throws std::invalid_argument unless the instance has at most 2 states,
/// 2 actions and one cost.
GapAffine gap_affine_terms(const GapInstance& inst);

struct GapReport {
  BoundReport report;
  double gap = 0.0;
  double tau_grid = 0.0;
  double constrained_value = 0.0;
  double barrier_value = 0.0;
};

/// Compares the constrained per-step optimum with the log-barrier optimum by
/// grid search over per-state action simplices (two actions per state).
GapReport check_ipo_gap(const GapInstance& inst, double t, int grid_resolution);

}  // namespace acpo
