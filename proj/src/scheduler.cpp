#include "acpo/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace acpo {

void StageConfig::validate() const {
  if (n1 < 1 || n2 < 1 || n_e < 1) throw std::invalid_argument("n1, n2 and n_e must be >= 1");
  if (!(k_p > 0.0)) throw std::invalid_argument("k_p must be positive");
  if (enlarge_gain && !(*enlarge_gain > 0.0)) {
    throw std::invalid_argument("enlarge_gain must be positive");
  }
  if (d0.size() == 0 || d0.size() != desired.size()) {
    throw std::invalid_argument("d0 and desired budgets must be non-empty and equally long");
  }
  for (int i = 0; i < d0.size(); ++i) {
    if (!(desired[i] >= 0.0)) throw std::invalid_argument("desired budgets must be >= 0");
    if (!(d0[i] >= desired[i])) throw std::invalid_argument("d0 must be >= desired budget");
  }
  if (!(finish_tol >= 0.0)) throw std::invalid_argument("finish_tol must be >= 0");
  if (converge_window < 2) throw std::invalid_argument("converge_window must be >= 2");
  if (!(converge_rel_tol >= 0.0)) throw std::invalid_argument("converge_rel_tol must be >= 0");
  if (queue_capacity < converge_window) {
    throw std::invalid_argument("queue_capacity must be >= converge_window");
  }
}

bool converged(const ReturnQueue& queue, int window, double rel_tol) {
  if (window < 1 || queue.size() < window) return false;
  const auto& v = queue.values();
  const auto begin = v.end() - window;
  double mean = 0.0;
  for (auto it = begin; it != v.end(); ++it) mean += *it;
  mean /= window;
  double ss = 0.0;
  for (auto it = begin; it != v.end(); ++it) ss += (*it - mean) * (*it - mean);
  return std::sqrt(ss / window) <= rel_tol * (1.0 + std::abs(mean));
}

double projection_delta(double d_old, double d_des, double k_p) {
  if (!(k_p > 0.0)) throw std::invalid_argument("k_p must be positive");
  return k_p * (d_des - d_old);
}

std::string to_string(BudgetEvent event) {
  switch (event) {
    case BudgetEvent::None: return "";
    case BudgetEvent::Explore: return "explore";
    case BudgetEvent::Finish: return "finish";
    case BudgetEvent::Project: return "project";
    case BudgetEvent::Enlarge: return "enlarge";
    case BudgetEvent::ProjectionExit: return "projection-exit";
    case BudgetEvent::ToMinCost: return "to-min-cost";
    case BudgetEvent::MinCostSkipped: return "min-cost-skipped";
    case BudgetEvent::ToMaxReward: return "to-max-reward";
  }
  return "";
}

std::vector<int> violating_costs(const BudgetState& state) {
  std::vector<int> out;
  for (int i = 0; i < state.num_costs(); ++i) {
    const auto mean = state.queue_cost[i].mean();
    if (mean && *mean > state.desired[i]) out.push_back(i);
  }
  return out;
}

namespace {

void reset_queues(BudgetState& st) {
  st.queue_reward.clear();
  for (auto& q : st.queue_cost) q.clear();
}

}  // namespace

BudgetUpdate update_budgets(BudgetState& st, const StageConfig& cfg) {
  const int m = st.num_costs();
  if (static_cast<int>(st.queue_cost.size()) != m || st.desired.size() != m) {
    throw std::invalid_argument("budget state has inconsistent constraint counts");
  }
  BudgetUpdate out;
  if (st.global_iter < cfg.n_e) {
    st.stage = StageKind::MaxReward;
    out.event = BudgetEvent::Explore;
    return out;
  }

  bool all_converged = converged(st.queue_reward, cfg.converge_window, cfg.converge_rel_tol);
  for (const auto& q : st.queue_cost) {
    all_converged = all_converged && converged(q, cfg.converge_window, cfg.converge_rel_tol);
  }

  if (all_converged) {
    Vector mean(m);
    for (int i = 0; i < m; ++i) mean[i] = *st.queue_cost[i].mean();
    const Vector gap = mean - st.desired;
    if (gap.cwiseAbs().maxCoeff() <= cfg.finish_tol) {
      out.terminate = true;
      out.event = BudgetEvent::Finish;
      return out;
    }
    if (st.stage == StageKind::Projection) {
      st.stage = StageKind::MaxReward;
      out.event = BudgetEvent::ProjectionExit;
    } else {
      bool any_violation = false;
      for (int i = 0; i < m; ++i) any_violation = any_violation || gap[i] > cfg.finish_tol;
      if (any_violation) {
        for (int i = 0; i < m; ++i) {
          if (gap[i] > cfg.finish_tol) {
            st.cost_budget[i] += projection_delta(mean[i], st.desired[i], cfg.k_p);
          }
        }
        st.stage = StageKind::Projection;
        out.event = BudgetEvent::Project;
      } else {
        const double gain = cfg.enlarge_gain.value_or(cfg.k_p);
        for (int i = 0; i < m; ++i) {
          if (-gap[i] > cfg.finish_tol) {
            st.cost_budget[i] += projection_delta(mean[i], st.desired[i], gain);
          }
        }
        st.stage = StageKind::MaxReward;
        out.event = BudgetEvent::Enlarge;
      }
    }
    st.cost_budget = st.cost_budget.cwiseMax(0.0);
    reset_queues(st);
    st.iter_in_stage = 0;
    return out;
  }

  if (st.stage == StageKind::MaxReward && st.iter_in_stage >= cfg.n1) {
    st.reward_budget = st.queue_reward.mean().value_or(st.reward_budget);
    st.iter_in_stage = 0;
    if (violating_costs(st).empty()) {
      out.event = BudgetEvent::MinCostSkipped;
    } else {
      st.stage = StageKind::MinCost;
      out.event = BudgetEvent::ToMinCost;
    }
  } else if (st.stage == StageKind::MinCost && st.iter_in_stage >= cfg.n2) {
    for (int i = 0; i < m; ++i) {
      st.cost_budget[i] = std::max(0.0, st.queue_cost[i].mean().value_or(st.cost_budget[i]));
    }
    st.stage = StageKind::MaxReward;
    st.iter_in_stage = 0;
    out.event = BudgetEvent::ToMaxReward;
  }
  return out;
}

}  // namespace acpo
