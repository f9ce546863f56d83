#include "acpo/estimation.hpp"

#include <cmath>
#include <numeric>
#include <thread>

namespace acpo {

void TrajectoryBatch::validate() const {
  const std::size_t n = state.size();
  auto same = [n](std::size_t k) { return k == n; };
  bool ok = same(action.size()) && same(next_state.size()) && same(reward.size()) &&
            same(old_log_prob.size()) && same(episode_id.size()) && same(step_index.size()) &&
            same(terminal.size()) && same(segment_end.size());
  for (const auto& c : cost) ok = ok && same(c.size());
  if (!ok) throw std::invalid_argument("trajectory batch columns differ in length");
  for (double lp : old_log_prob) {
    if (!std::isfinite(lp)) throw std::invalid_argument("old log-probability is not finite");
  }
}

namespace {

TrajectoryBatch empty_batch(int m, int reserve) {
  TrajectoryBatch b;
  b.cost.assign(m, {});
  b.episode_cost_returns.assign(m, {});
  b.state.reserve(reserve);
  b.action.reserve(reserve);
  b.next_state.reserve(reserve);
  b.reward.reserve(reserve);
  for (auto& c : b.cost) c.reserve(reserve);
  b.old_log_prob.reserve(reserve);
  b.episode_id.reserve(reserve);
  b.step_index.reserve(reserve);
  b.terminal.reserve(reserve);
  b.segment_end.reserve(reserve);
  return b;
}

TrajectoryBatch collect_chunk(const CmdpSpec& spec, const Matrix& probs, const Matrix& log_probs,
                              int count, std::uint64_t seed, int worker) {
  const int m = spec.num_costs();
  TrajectoryBatch b = empty_batch(m, count);
  b.discount = spec.discount;
  Rng action_rng = make_rng(seed, "action", static_cast<std::uint64_t>(worker));
  EnvState env = reset(spec, make_rng(seed, "env", static_cast<std::uint64_t>(worker)));
  int episode = 0;
  double discount = 1.0;
  double ret_r = 0.0;
  std::vector<double> ret_c(m, 0.0);
  for (int t = 0; t < count; ++t) {
    const int s = env.state_index;
    const int a = sample_categorical(probs.row(s), action_rng);
    const int step_idx = env.steps_elapsed;
    StepResult res = step(spec, env, a);
    b.state.push_back(s);
    b.action.push_back(a);
    b.next_state.push_back(env.state_index);
    b.reward.push_back(res.reward);
    for (int i = 0; i < m; ++i) b.cost[i].push_back(res.costs[i]);
    b.old_log_prob.push_back(log_probs(s, a));
    b.episode_id.push_back(episode);
    b.step_index.push_back(step_idx);
    b.terminal.push_back(res.terminal ? 1 : 0);
    const bool last = res.done || t + 1 == count;
    b.segment_end.push_back(last ? 1 : 0);

    ret_r += discount * res.reward;
    for (int i = 0; i < m; ++i) ret_c[i] += discount * res.costs[i];
    discount *= spec.discount;

    if (res.done) {
      b.episode_reward_returns.push_back(ret_r);
      for (int i = 0; i < m; ++i) b.episode_cost_returns[i].push_back(ret_c[i]);
      ret_r = 0.0;
      std::fill(ret_c.begin(), ret_c.end(), 0.0);
      discount = 1.0;
      ++episode;
      reset_in_place(spec, env);
    }
  }
  return b;
}

void append(TrajectoryBatch& into, const TrajectoryBatch& from) {
  const int episode_offset = into.episode_id.empty() ? 0 : into.episode_id.back() + 1;
  into.state.insert(into.state.end(), from.state.begin(), from.state.end());
  into.action.insert(into.action.end(), from.action.begin(), from.action.end());
  into.next_state.insert(into.next_state.end(), from.next_state.begin(), from.next_state.end());
  into.reward.insert(into.reward.end(), from.reward.begin(), from.reward.end());
  for (std::size_t i = 0; i < into.cost.size(); ++i) {
    into.cost[i].insert(into.cost[i].end(), from.cost[i].begin(), from.cost[i].end());
    into.episode_cost_returns[i].insert(into.episode_cost_returns[i].end(),
                                        from.episode_cost_returns[i].begin(),
                                        from.episode_cost_returns[i].end());
  }
  into.old_log_prob.insert(into.old_log_prob.end(), from.old_log_prob.begin(),
                           from.old_log_prob.end());
  for (int e : from.episode_id) into.episode_id.push_back(e + episode_offset);
  into.step_index.insert(into.step_index.end(), from.step_index.begin(), from.step_index.end());
  into.terminal.insert(into.terminal.end(), from.terminal.begin(), from.terminal.end());
  into.segment_end.insert(into.segment_end.end(), from.segment_end.begin(),
                          from.segment_end.end());
  into.episode_reward_returns.insert(into.episode_reward_returns.end(),
                                     from.episode_reward_returns.begin(),
                                     from.episode_reward_returns.end());
}

}  // namespace

TrajectoryBatch collect(const CmdpSpec& spec, const PolicyParams& params, int num_transitions,
                        std::uint64_t seed, int workers) {
  if (num_transitions < 1) throw std::invalid_argument("num_transitions must be at least 1");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (params.num_states() != spec.num_states || params.num_actions() != spec.num_actions) {
    throw std::invalid_argument("policy is not bound to this spec");
  }
  const Matrix probs = params.prob_table();
  const Matrix log_probs = params.log_prob_table();
  workers = std::min(workers, num_transitions);
  if (workers == 1) return collect_chunk(spec, probs, log_probs, num_transitions, seed, 0);

  std::vector<TrajectoryBatch> parts(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const int base = num_transitions / workers;
  const int extra = num_transitions % workers;
  for (int w = 0; w < workers; ++w) {
    const int count = base + (w < extra ? 1 : 0);
    threads.emplace_back([&, w, count] {
      parts[w] = collect_chunk(spec, probs, log_probs, count, seed, w);
    });
  }
  for (auto& t : threads) t.join();
  TrajectoryBatch out = empty_batch(spec.num_costs(), num_transitions);
  out.discount = spec.discount;
  for (const auto& p : parts) append(out, p);
  return out;
}

GaeResult gae(const TrajectoryBatch& batch, const Vector& values, double gamma, double lambda,
              int signal) {
  const int n = batch.size();
  if (signal < kRewardSignal || signal >= batch.num_costs()) {
    throw std::invalid_argument("GAE signal index out of range");
  }
  const std::vector<double>& r = signal == kRewardSignal ? batch.reward : batch.cost[signal];
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.value_targets.assign(n, 0.0);
  double running = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double v = values[batch.state[t]];
    const double next_v = batch.terminal[t] ? 0.0 : values[batch.next_state[t]];
    const double delta = r[t] + gamma * next_v - v;
    running = batch.segment_end[t] ? delta : delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.value_targets[t] = running + v;
  }
  return out;
}

double TrajectoryBatch::discounted_steps_per_episode() const {
  double total = 0.0;
  int episodes = 0;
  for (int j = 0; j < size(); ++j) {
    total += std::pow(discount, step_index[j]);
    if (step_index[j] == 0) ++episodes;
  }
  return episodes > 0 ? total / episodes : total;
}

void EstimatorConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(lambda_reward >= 0.0 && lambda_reward <= 1.0)) {
    throw std::invalid_argument("gae_lambda_reward must lie in [0, 1]");
  }
  if (!(lambda_cost >= 0.0 && lambda_cost <= 1.0)) {
    throw std::invalid_argument("gae_lambda_cost must lie in [0, 1]");
  }
  if (value_fit_epochs < 1) throw std::invalid_argument("value_fit_epochs must be at least 1");
  if (!(value_learning_rate > 0.0)) {
    throw std::invalid_argument("value_learning_rate must be positive");
  }
}

Critic Critic::zeros(int num_states, int num_costs) {
  Critic c;
  c.reward = Vector::Zero(num_states);
  c.cost.assign(num_costs, Vector::Zero(num_states));
  return c;
}

namespace {

double mean_or_fallback(const std::vector<double>& completed, const TrajectoryBatch& batch,
                        const std::vector<double>& signal, double gamma_hint) {
  if (!completed.empty()) {
    return std::accumulate(completed.begin(), completed.end(), 0.0) /
           static_cast<double>(completed.size());
  }
  // No episode finished inside the batch: average the discounted fragment sums.
  double total = 0.0;
  int fragments = 0;
  double acc = 0.0;
  for (int t = 0; t < batch.size(); ++t) {
    acc += std::pow(gamma_hint, batch.step_index[t]) * signal[t];
    if (batch.segment_end[t]) {
      total += acc;
      acc = 0.0;
      ++fragments;
    }
  }
  return fragments > 0 ? total / fragments : 0.0;
}

}  // namespace

double estimate_reward_return(const TrajectoryBatch& batch) {
  return mean_or_fallback(batch.episode_reward_returns, batch, batch.reward, batch.discount);
}

Vector estimate_cost_returns(const TrajectoryBatch& batch) {
  Vector out(batch.num_costs());
  for (int i = 0; i < batch.num_costs(); ++i) {
    out[i] = mean_or_fallback(batch.episode_cost_returns[i], batch, batch.cost[i],
                              batch.discount);
  }
  return out;
}

EstimateSet estimate(const TrajectoryBatch& batch, const Critic& critic,
                     const EstimatorConfig& cfg) {
  if (batch.size() == 0) throw std::invalid_argument("cannot estimate from an empty batch");
  const int m = batch.num_costs();
  EstimateSet est;
  GaeResult rew = gae(batch, critic.reward, cfg.gamma, cfg.lambda_reward, kRewardSignal);
  est.adv_reward_raw = rew.advantages;
  if (cfg.center_cost_advantages) {
    auto& a = est.adv_reward_raw;
    const double mu = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    for (double& x : a) x -= mu;
  }
  est.value_targets_reward = std::move(rew.value_targets);
  est.adv_reward = std::move(rew.advantages);
  if (cfg.normalize_reward_advantages && batch.size() > 1) {
    const double n = static_cast<double>(batch.size());
    const double mu = std::accumulate(est.adv_reward.begin(), est.adv_reward.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : est.adv_reward) ss += (a - mu) * (a - mu);
    const double sd = std::sqrt(ss / n);
    est.reward_scale = sd + 1e-8;
    for (double& a : est.adv_reward) a = (a - mu) / est.reward_scale;
  }
  est.adv_cost.resize(m);
  est.value_targets_cost.resize(m);
  for (int i = 0; i < m; ++i) {
    GaeResult c = gae(batch, critic.cost[i], cfg.gamma, cfg.lambda_cost, i);
    est.adv_cost[i] = std::move(c.advantages);
    est.value_targets_cost[i] = std::move(c.value_targets);
    if (cfg.center_cost_advantages) {
      auto& a = est.adv_cost[i];
      const double mu = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
      for (double& x : a) x -= mu;
    }
  }
  est.episode_reward_return = estimate_reward_return(batch);
  est.episode_cost_returns = estimate_cost_returns(batch);
  return est;
}

Vector fit_values(const TrajectoryBatch& batch, const std::vector<double>& targets,
                  const Vector& previous) {
  if (targets.size() != static_cast<std::size_t>(batch.size())) {
    throw std::invalid_argument("targets do not match the batch");
  }
  Vector sum = Vector::Zero(previous.size());
  Vector count = Vector::Zero(previous.size());
  for (int t = 0; t < batch.size(); ++t) {
    if (!std::isfinite(targets[t])) throw NumericError("value target is not finite");
    sum[batch.state[t]] += targets[t];
    count[batch.state[t]] += 1.0;
  }
  Vector out = previous;
  for (int s = 0; s < out.size(); ++s) {
    if (count[s] > 0.0) out[s] = sum[s] / count[s];
  }
  return out;
}

Critic fit_critic(const TrajectoryBatch& batch, const EstimateSet& est, const Critic& previous) {
  Critic out;
  out.reward = fit_values(batch, est.value_targets_reward, previous.reward);
  out.cost.resize(previous.cost.size());
  for (std::size_t i = 0; i < previous.cost.size(); ++i) {
    out.cost[i] = fit_values(batch, est.value_targets_cost[i], previous.cost[i]);
  }
  return out;
}

Vector fit_values_linear(const Matrix& features, const std::vector<int>& states,
                         const std::vector<double>& targets, const Vector& initial_weights,
                         const EstimatorConfig& cfg) {
  if (states.size() != targets.size() || states.empty()) {
    throw std::invalid_argument("states and targets must be non-empty and equally long");
  }
  if (initial_weights.size() != features.cols()) {
    throw std::invalid_argument("critic weights do not match the feature dimension");
  }
  // Aggregate the squared error by state: the gradient only needs per-state
  // sample counts and target sums.
  Vector count = Vector::Zero(features.rows());
  Vector target_sum = Vector::Zero(features.rows());
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (!std::isfinite(targets[k])) throw NumericError("value target is not finite");
    count[states[k]] += 1.0;
    target_sum[states[k]] += targets[k];
  }
  const double n = static_cast<double>(states.size());
  Vector w = initial_weights;
  for (int epoch = 0; epoch < cfg.value_fit_epochs; ++epoch) {
    const Vector pred = features * w;
    const Vector residual_sum = count.cwiseProduct(pred) - target_sum;
    const Vector grad = (2.0 / n) * (features.transpose() * residual_sum);
    w -= cfg.value_learning_rate * grad;
    if (!w.allFinite()) throw NumericError("linear critic diverged");
  }
  return w;
}

Matrix ExactEval::advantage_reward() const {
  return q_reward.colwise() - v_reward;
}

Matrix ExactEval::advantage_cost(int i) const {
  return q_cost.at(i).colwise() - v_cost.at(i);
}

namespace {

// Solves M x = b with one round of iterative refinement.
Vector refined_solve(const Eigen::PartialPivLU<Matrix>& lu, const Matrix& M, const Vector& b) {
  Vector x = lu.solve(b);
  const Vector r = b - M * x;
  x += lu.solve(r);
  return x;
}

}  // namespace

ExactEval exact_eval(const CmdpSpec& spec, const PolicyParams& params) {
  if (params.num_states() != spec.num_states || params.num_actions() != spec.num_actions) {
    throw std::invalid_argument("policy is not bound to this spec");
  }
  return exact_eval(spec, params.prob_table());
}

ExactEval exact_eval(const CmdpSpec& spec, const Matrix& probs) {
  const int S = spec.num_states;
  const int A = spec.num_actions;
  const int m = spec.num_costs();
  if (probs.rows() != S || probs.cols() != A) {
    throw std::invalid_argument("probability table has wrong shape");
  }
  const double g = spec.discount;
  Matrix P = Matrix::Zero(S, S);
  Vector r_pi = Vector::Zero(S);
  std::vector<Vector> c_pi(m, Vector::Zero(S));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double pa = probs(s, a);
      if (pa == 0.0) continue;
      const double* row = spec.row(s, a);
      for (int n = 0; n < S; ++n) P(s, n) += pa * row[n];
      r_pi[s] += pa * spec.reward(s, a);
      for (int i = 0; i < m; ++i) c_pi[i][s] += pa * spec.costs[i](s, a);
    }
  }
  const Matrix M = Matrix::Identity(S, S) - g * P;
  Eigen::PartialPivLU<Matrix> lu(M);
  if (!std::isfinite(lu.determinant()) || std::abs(lu.determinant()) < 1e-300) {
    throw NumericError("singular policy evaluation system");
  }
  ExactEval ev;
  ev.v_reward = refined_solve(lu, M, r_pi);
  ev.v_cost.resize(m);
  for (int i = 0; i < m; ++i) ev.v_cost[i] = refined_solve(lu, M, c_pi[i]);

  const Matrix Mt = M.transpose();
  Eigen::PartialPivLU<Matrix> lut(Mt);
  ev.visitation = (1.0 - g) * refined_solve(lut, Mt, spec.initial_dist);

  auto q_of = [&](const Matrix& signal, const Vector& v) {
    Matrix q(S, A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double* row = spec.row(s, a);
        double ev_next = 0.0;
        for (int n = 0; n < S; ++n) ev_next += row[n] * v[n];
        q(s, a) = signal(s, a) + g * ev_next;
      }
    }
    return q;
  };
  ev.q_reward = q_of(spec.reward, ev.v_reward);
  ev.q_cost.resize(m);
  ev.j_cost = Vector::Zero(m);
  for (int i = 0; i < m; ++i) {
    ev.q_cost[i] = q_of(spec.costs[i], ev.v_cost[i]);
    ev.j_cost[i] = spec.initial_dist.dot(ev.v_cost[i]);
  }
  ev.j_reward = spec.initial_dist.dot(ev.v_reward);
  if (!ev.v_reward.allFinite()) throw NumericError("exact evaluation produced non-finite values");
  return ev;
}

void update_queues(BudgetState& state, const EstimateSet& est) {
  state.queue_reward.push(est.episode_reward_return);
  if (static_cast<int>(state.queue_cost.size()) != est.episode_cost_returns.size()) {
    throw std::invalid_argument("estimate and budget state disagree on constraint count");
  }
  for (std::size_t i = 0; i < state.queue_cost.size(); ++i) {
    state.queue_cost[i].push(est.episode_cost_returns[static_cast<int>(i)]);
  }
}

}  // namespace acpo
