#include "acpo/stage_objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace acpo {

void StageObjective::validate(int num_costs) const {
  if (!(barrier_t > 0.0)) throw std::invalid_argument("barrier_t must be positive");
  if (!(barrier_cap > 0.0)) throw std::invalid_argument("barrier_cap must be positive");
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) {
    throw std::invalid_argument("clip_ratio must lie in (0, 1)");
  }
  if (cost_budget.size() != num_costs) {
    throw std::invalid_argument("cost budget length does not match the constraint count");
  }
  for (int i : active_costs) {
    if (i < 0 || i >= num_costs) throw std::invalid_argument("active cost index out of range");
  }
}

double barrier_phi(double x, double t, double cap) {
  const double x0 = 1.0 / (t * cap);
  if (x <= -x0) return std::min(std::log(-x) / t, cap);
  return std::log(x0) / t - cap * (x + x0);
}

double barrier_slope(double x, double t, double cap) {
  const double x0 = 1.0 / (t * cap);
  if (x <= -x0) return std::log(-x) / t >= cap ? 0.0 : 1.0 / (t * x);
  return -cap;
}

namespace {

// min(r A, clip(r) A) and its derivative with respect to log pi.
struct Clipped {
  double value;
  double dlog;
};

Clipped clipped_term(double ratio, double adv, double eps) {
  const bool flat = (adv >= 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps);
  if (flat) return {std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv, 0.0};
  return {ratio * adv, ratio * adv};
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_shapes(const PolicyParams& params, const TrajectoryBatch& batch,
                  const EstimateSet& est) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (est.adv_reward.size() != static_cast<std::size_t>(batch.size()) ||
      est.adv_cost.size() != static_cast<std::size_t>(batch.num_costs())) {
    throw std::invalid_argument("estimate does not match the batch");
  }
  for (int s : batch.state) {
    if (s < 0 || s >= params.num_states()) throw std::invalid_argument("batch state out of range");
  }
}

}  // namespace

ObjectiveEval evaluate_stage_objective(const PolicyParams& params, const TrajectoryBatch& batch,
                                       const EstimateSet& est, const StageObjective& obj,
                                       const PolicyParams* frozen,
                                       const std::vector<int>& indices, bool with_gradient) {
  check_shapes(params, batch, est);
  obj.validate(batch.num_costs());
  if (indices.empty()) throw std::invalid_argument("objective needs at least one transition");
  if (obj.kind == StageKind::MinCost && obj.active_costs.empty()) {
    throw std::invalid_argument("min-cost objective with no active constraint");
  }
  if (obj.kind == StageKind::Projection && frozen == nullptr) {
    throw std::invalid_argument("projection objective needs the frozen policy");
  }

  const int S = params.num_states();
  const int A = params.num_actions();
  const int m = batch.num_costs();
  const Matrix logp = params.log_prob_table();
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  const double scale = batch.discounted_steps_per_episode();
  const double eps = obj.clip_ratio;

  std::vector<double> ratio(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int j = indices[k];
    ratio[k] = std::exp(logp(batch.state[j], batch.action[j]) - batch.old_log_prob[j]);
  }

  // Gradient of the objective with respect to log pi(a_j | s_j), per transition.
  std::vector<double> g_logp(with_gradient ? indices.size() : 0, 0.0);
  Matrix g_logits;
  if (with_gradient) g_logits = Matrix::Zero(S, A);

  // Reward advantages are divided by their spread in the max-reward stage.
  // Dividing that stage's barrier by the same factor keeps the reward against
  // constraint trade-off independent of the reward scale.
  const double weight = obj.kind == StageKind::MaxReward ? 1.0 / est.reward_scale : 1.0;

  SurrogateValue val;
  // Barrier over sum_j ratio_j * adv_j, with argument offset + scale * mean.
  auto add_barrier = [&](const std::vector<double>& adv, double offset, double sign) {
    if (!obj.use_barrier) return;
    double mean = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) mean += ratio[k] * adv[indices[k]];
    mean *= inv_n;
    const double x = offset + sign * scale * mean;
    val.barrier_arguments.push_back(x);
    if (x >= 0.0) val.domain_ok = false;
    val.barrier += weight * barrier_phi(x, obj.barrier_t, obj.barrier_cap);
    if (with_gradient) {
      const double coef =
          weight * barrier_slope(x, obj.barrier_t, obj.barrier_cap) * sign * scale * inv_n;
      for (std::size_t k = 0; k < indices.size(); ++k) {
        g_logp[k] += coef * ratio[k] * adv[indices[k]];
      }
    }
  };
  auto add_clipped = [&](const std::vector<double>& adv, double sign) {
    double total = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const Clipped c = clipped_term(ratio[k], sign * adv[indices[k]], eps);
      total += c.value;
      if (with_gradient) g_logp[k] += c.dlog * inv_n;
    }
    val.surrogate += total * inv_n;
  };

  switch (obj.kind) {
    case StageKind::MaxReward:
      add_clipped(est.adv_reward, 1.0);
      for (int i = 0; i < m; ++i) {
        add_barrier(est.adv_cost[i], est.episode_cost_returns[i] - obj.cost_budget[i], 1.0);
      }
      break;
    case StageKind::MinCost:
      for (int i : obj.active_costs) add_clipped(est.adv_cost[i], -1.0);
      add_barrier(est.adv_reward_raw, obj.reward_budget - est.episode_reward_return, -1.0);
      break;
    case StageKind::Projection: {
      const Matrix logq = frozen->log_prob_table();
      if (logq.rows() != S || logq.cols() != A) {
        throw std::invalid_argument("frozen policy has a different shape");
      }
      Vector visits = Vector::Zero(S);
      for (int j : indices) visits[batch.state[j]] += 1.0;
      double kl_total = 0.0;
      for (int s = 0; s < S; ++s) {
        if (visits[s] == 0.0) continue;
        double kl = 0.0;
        for (int a = 0; a < A; ++a) kl += std::exp(logp(s, a)) * (logp(s, a) - logq(s, a));
        kl_total += visits[s] * kl;
        if (with_gradient) {
          const double w = -visits[s] * inv_n;
          for (int b = 0; b < A; ++b) {
            g_logits(s, b) += w * std::exp(logp(s, b)) * ((logp(s, b) - logq(s, b)) - kl);
          }
        }
      }
      val.surrogate = -kl_total * inv_n;
      for (int i = 0; i < m; ++i) {
        add_barrier(est.adv_cost[i], est.episode_cost_returns[i] - obj.cost_budget[i], 1.0);
      }
      break;
    }
  }
  val.objective = val.surrogate + val.barrier;

  ObjectiveEval out{val, Matrix()};
  if (with_gradient) {
    Matrix per_action = Matrix::Zero(S, A);
    Vector per_state = Vector::Zero(S);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const int j = indices[k];
      per_action(batch.state[j], batch.action[j]) += g_logp[k];
      per_state[batch.state[j]] += g_logp[k];
    }
    // d log pi(a|s) / d z(s,b) = 1[a=b] - pi(b|s)
    for (int s = 0; s < S; ++s) {
      if (per_state[s] == 0.0) {
        g_logits.row(s) += per_action.row(s);
        continue;
      }
      for (int b = 0; b < A; ++b) {
        g_logits(s, b) += per_action(s, b) - std::exp(logp(s, b)) * per_state[s];
      }
    }
    out.weight_gradient = params.logits_to_weights_gradient(g_logits);
  }
  return out;
}

double surrogate_cost_constraint(const TrajectoryBatch& batch, const EstimateSet& est,
                                 const PolicyParams& params, double budget, int constraint) {
  check_shapes(params, batch, est);
  if (constraint < 0 || constraint >= batch.num_costs()) {
    throw std::invalid_argument("constraint index out of range");
  }
  const Matrix logp = params.log_prob_table();
  const auto& adv = est.adv_cost[constraint];
  double mean = 0.0;
  for (int j = 0; j < batch.size(); ++j) {
    mean += std::exp(logp(batch.state[j], batch.action[j]) - batch.old_log_prob[j]) * adv[j];
  }
  mean /= batch.size();
  return est.episode_cost_returns[constraint] + batch.discounted_steps_per_episode() * mean -
         budget;
}

namespace {

SurrogateValue full_batch_value(const TrajectoryBatch& batch, const EstimateSet& est,
                                const PolicyParams& params, const StageObjective& obj,
                                const PolicyParams* frozen, StageKind expected) {
  if (obj.kind != expected) throw std::invalid_argument("objective kind mismatch");
  return evaluate_stage_objective(params, batch, est, obj, frozen, all_indices(batch.size()),
                                  false)
      .value;
}

}  // namespace

SurrogateValue max_reward_objective(const TrajectoryBatch& batch, const EstimateSet& est,
                                    const PolicyParams& params, const StageObjective& obj) {
  return full_batch_value(batch, est, params, obj, nullptr, StageKind::MaxReward);
}

SurrogateValue min_cost_objective(const TrajectoryBatch& batch, const EstimateSet& est,
                                  const PolicyParams& params, const StageObjective& obj) {
  return full_batch_value(batch, est, params, obj, nullptr, StageKind::MinCost);
}

SurrogateValue projection_objective(const TrajectoryBatch& batch, const EstimateSet& est,
                                    const PolicyParams& params, const PolicyParams& frozen,
                                    const StageObjective& obj) {
  return full_batch_value(batch, est, params, obj, &frozen, StageKind::Projection);
}

SurrogateValue stage_objective_value(const TrajectoryBatch& batch, const EstimateSet& est,
                                     const PolicyParams& params, const StageObjective& obj,
                                     const PolicyParams* frozen) {
  return evaluate_stage_objective(params, batch, est, obj, frozen, all_indices(batch.size()),
                                  false)
      .value;
}

Matrix surrogate_gradient(const PolicyParams& params, const TrajectoryBatch& batch,
                          const EstimateSet& est, const StageObjective& obj,
                          const PolicyParams* frozen) {
  return evaluate_stage_objective(params, batch, est, obj, frozen, all_indices(batch.size()),
                                  true)
      .weight_gradient;
}

double batch_kl(const PolicyParams& params, const PolicyParams& reference,
                const TrajectoryBatch& batch) {
  if (batch.size() == 0) return 0.0;
  const Matrix logp = params.log_prob_table();
  const Matrix logq = reference.log_prob_table();
  if (logq.rows() != logp.rows() || logq.cols() != logp.cols()) {
    throw std::invalid_argument("policies have different shapes");
  }
  Vector visits = Vector::Zero(logp.rows());
  for (int s : batch.state) visits[s] += 1.0;
  double total = 0.0;
  for (int s = 0; s < logp.rows(); ++s) {
    if (visits[s] == 0.0) continue;
    double kl = 0.0;
    for (int a = 0; a < logp.cols(); ++a) kl += std::exp(logp(s, a)) * (logp(s, a) - logq(s, a));
    total += visits[s] * kl;
  }
  return std::max(total / batch.size(), 0.0);
}

void AscendConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (num_minibatches < 1) throw std::invalid_argument("num_minibatches must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(kl_stop >= 0.0)) throw std::invalid_argument("kl_stop must be non-negative");
}

namespace {

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
}

}  // namespace

AscendResult ascend(const PolicyParams& params, const TrajectoryBatch& batch,
                    const EstimateSet& est, const StageObjective& obj, const AscendConfig& cfg,
                    AdamState& adam, Rng& rng, const PolicyParams* frozen) {
  cfg.validate();
  const int n = batch.size();
  {
    const Matrix logp = params.log_prob_table();
    for (int j = 0; j < n; ++j) {
      if (std::abs(logp(batch.state[j], batch.action[j]) - batch.old_log_prob[j]) > 1e-9) {
        throw std::invalid_argument("batch was not sampled from the policy being updated");
      }
    }
  }
  std::vector<int> order = all_indices(n);

  AscendResult res{params, UpdateLog{}};
  UpdateLog& log = res.log;
  log.stage = obj.kind;
  const ObjectiveEval first = evaluate_stage_objective(params, batch, est, obj, frozen, order, true);
  log.objective_before = first.value.objective;
  log.grad_norm = first.weight_gradient.norm();
  if (!first.weight_gradient.allFinite() || !std::isfinite(first.value.objective)) {
    log.aborted = true;
    log.objective_after = log.objective_before;
    log.barrier_arguments = first.value.barrier_arguments;
    log.domain_ok = first.value.domain_ok;
    return res;
  }

  if (!cfg.persistent_moments) adam = AdamState{};
  const AdamState adam_backup = adam;
  const int mb = std::min(cfg.num_minibatches, n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch_kl(res.params, params, batch) >= cfg.kl_stop) {
      log.early_stopped = true;
      break;
    }
    shuffle_indices(order, rng);
    for (int b = 0; b < mb; ++b) {
      const int lo = static_cast<int>(static_cast<long>(n) * b / mb);
      const int hi = static_cast<int>(static_cast<long>(n) * (b + 1) / mb);
      const std::vector<int> part(order.begin() + lo, order.begin() + hi);
      const ObjectiveEval ev =
          evaluate_stage_objective(res.params, batch, est, obj, frozen, part, true);
      if (!ev.weight_gradient.allFinite()) {
        log.aborted = true;
        break;
      }
      adam.ascend(res.params.weights(), ev.weight_gradient, cfg.learning_rate);
      ++log.steps;
    }
    if (log.aborted) break;
    ++log.epochs_run;
  }
  if (log.aborted || !res.params.weights().allFinite()) {
    log.aborted = true;
    res.params = params;
    adam = adam_backup;
  }
  const SurrogateValue after = stage_objective_value(batch, est, res.params, obj, frozen);
  log.objective_after = after.objective;
  log.barrier_arguments = after.barrier_arguments;
  log.domain_ok = after.domain_ok;
  log.kl = batch_kl(res.params, params, batch);
  log.kl_overshoot = cfg.kl_stop > 0.0 && log.kl > 2.0 * cfg.kl_stop;
  return res;
}

AscendResult ascend(const PolicyParams& params, const TrajectoryBatch& batch,
                    const EstimateSet& est, const StageObjective& obj, const AscendConfig& cfg,
                    Rng& rng, const PolicyParams* frozen) {
  AdamState adam;
  return ascend(params, batch, est, obj, cfg, adam, rng, frozen);
}

}  // namespace acpo
