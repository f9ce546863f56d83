#include "acpo/training.hpp"

#include <chrono>
#include <functional>

#include <spdlog/spdlog.h>

namespace acpo {

void TrainConfig::validate(int num_costs) const {
  static const std::vector<std::string> kAlgorithms = {"acpo", "ipo", "ipo-c", "ppo-lag", "crpo"};
  if (std::find(kAlgorithms.begin(), kAlgorithms.end(), algorithm) == kAlgorithms.end()) {
    throw std::invalid_argument("unknown algorithm: " + algorithm);
  }
  stage.validate();
  if (stage.d0.size() != num_costs) {
    throw std::invalid_argument("budget vectors must have one entry per cost signal");
  }
  estimator.validate();
  optimizer.validate();
  if (!(barrier_t > 0.0)) throw std::invalid_argument("barrier_t must be positive");
  if (!(barrier_cap > 0.0)) throw std::invalid_argument("barrier_cap must be positive");
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) {
    throw std::invalid_argument("clip_ratio must lie in (0, 1)");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (num_iterations < 1) throw std::invalid_argument("num_iterations must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (!(lagrange_lr > 0.0)) throw std::invalid_argument("lagrange_lr must be positive");
  if (!(lagrange_upper_bound > 0.0)) {
    throw std::invalid_argument("lagrange_upper_bound must be positive");
  }
  if (!(lagrange_init >= 0.0 && lagrange_init <= lagrange_upper_bound)) {
    throw std::invalid_argument("lagrange_init must lie in [0, lagrange_upper_bound]");
  }
  if (!(crpo_tol >= 0.0)) throw std::invalid_argument("crpo_tol must be >= 0");
  if (curriculum_decay_iters < 1) throw std::invalid_argument("curriculum_decay_iters must be >= 1");
}

PolicyParams initial_policy(const CmdpSpec& spec, Parameterization kind) {
  if (kind == Parameterization::TabularSoftmax) {
    return PolicyParams::tabular(spec.num_states, spec.num_actions);
  }
  return PolicyParams::linear(Matrix::Identity(spec.num_states, spec.num_states),
                              spec.num_actions);
}

namespace {

struct Sample {
  TrajectoryBatch batch;
  EstimateSet est;
};

// State shared by every algorithm's outer loop.
class Loop {
 public:
  Loop(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed)
      : spec_(spec),
        cfg_(cfg),
        seed_(seed),
        critic_(Critic::zeros(spec.num_states, spec.num_costs())),
        minibatch_rng_(make_rng(seed, "minibatch")) {
    spec.validate();
    cfg.validate(spec.num_costs());
    if (std::abs(cfg.estimator.gamma - spec.discount) > 1e-12) {
      throw std::invalid_argument("estimator gamma differs from the CMDP discount");
    }
    result_.algorithm = cfg.algorithm;
    result_.final_params = initial_policy(spec, cfg.policy_class);
    result_.policies.push_back(result_.final_params);
  }

  const PolicyParams& params() const { return result_.final_params; }
  AdamState& adam() { return adam_; }
  Rng& rng() { return minibatch_rng_; }
  RunResult& result() { return result_; }

  BaselineStepConfig step_config() const {
    BaselineStepConfig c;
    c.ascend = cfg_.optimizer;
    c.barrier_t = cfg_.barrier_t;
    c.barrier_cap = cfg_.barrier_cap;
    c.clip_ratio = cfg_.clip_ratio;
    return c;
  }

  StageObjective objective(StageKind kind) const {
    StageObjective obj;
    obj.kind = kind;
    obj.barrier_t = cfg_.barrier_t;
    obj.barrier_cap = cfg_.barrier_cap;
    obj.clip_ratio = cfg_.clip_ratio;
    return obj;
  }

  Sample sample(int iter) {
    start_ = std::chrono::steady_clock::now();
    Sample s;
    s.batch = collect(spec_, params(), cfg_.batch_size, substream_seed(seed_, "env", iter),
                      cfg_.workers);
    s.est = estimate(s.batch, critic_, cfg_.estimator);
    critic_ = fit_critic(s.batch, s.est, critic_);
    return s;
  }

  /// Accepts an update (or none) and appends the iteration's record.
  void finish(IterationRecord rec, const Sample& s, const AscendResult* update) {
    rec.j_reward_hat = s.est.episode_reward_return;
    rec.j_cost_hat = s.est.episode_cost_returns;
    if (update) {
      result_.final_params = update->params;
      result_.updates.push_back(update->log);
      rec.kl = update->log.kl;
      rec.objective = update->log.objective_after;
      rec.updated = !update->log.aborted;
    } else {
      UpdateLog none;
      none.stage = rec.stage;
      result_.updates.push_back(none);
    }
    const ExactEval ev = exact_eval(spec_, result_.final_params);
    rec.exact_j_reward = ev.j_reward;
    rec.exact_j_cost = ev.j_cost;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            start_)
                      .count();
    spdlog::debug("{} iter {} stage {} J_R_hat {:.4f} J_C_hat[0] {:.4f} d[0] {:.4f} {}",
                  cfg_.algorithm, rec.iter, to_string(rec.stage), rec.j_reward_hat,
                  rec.j_cost_hat[0], rec.cost_budget.size() ? rec.cost_budget[0] : 0.0,
                  rec.event);
    result_.records.push_back(std::move(rec));
    result_.policies.push_back(result_.final_params);
  }

  void reset_policy() {
    result_.final_params = initial_policy(spec_, cfg_.policy_class);
    adam_ = AdamState{};
  }

 private:
  const CmdpSpec& spec_;
  const TrainConfig& cfg_;
  std::uint64_t seed_;
  Critic critic_;
  AdamState adam_;
  Rng minibatch_rng_;
  RunResult result_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

RunResult run_acpo(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  Loop loop(spec, cfg, seed);
  BudgetState st = BudgetState::initial(cfg.stage.d0, cfg.stage.desired, cfg.stage.queue_capacity);
  std::optional<PolicyParams> frozen;
  int segment = 0;

  for (int k = 0; k < cfg.num_iterations; ++k) {
    st.global_iter = k;
    Sample s = loop.sample(k);
    update_queues(st, s.est);
    Vector queue_mean(st.num_costs());
    for (int i = 0; i < st.num_costs(); ++i) queue_mean[i] = *st.queue_cost[i].mean();
    const BudgetUpdate bu = update_budgets(st, cfg.stage);

    IterationRecord rec;
    rec.iter = k;
    rec.queue_cost_mean = std::move(queue_mean);
    rec.event = to_string(bu.event);
    if (bu.event != BudgetEvent::None && bu.event != BudgetEvent::Explore &&
        bu.event != BudgetEvent::Finish) {
      ++segment;
    }
    rec.segment = segment;
    rec.cost_budget = st.cost_budget;
    rec.reward_budget = st.reward_budget;
    rec.stage = st.stage;
    rec.flag = st.stage;

    if (bu.terminate) {
      loop.finish(std::move(rec), s, nullptr);
      loop.result().terminated = true;
      break;
    }
    if (bu.event == BudgetEvent::Project) frozen = loop.params();
    if (bu.event == BudgetEvent::ProjectionExit) {
      frozen.reset();
      if (cfg.stage.reset_policy_on_projection) loop.reset_policy();
    }
    if (bu.event == BudgetEvent::ProjectionExit && cfg.stage.reset_policy_on_projection) {
      // The batch was drawn from the discarded policy; skip this update.
      loop.finish(std::move(rec), s, nullptr);
      continue;
    }

    StageObjective obj = loop.objective(st.stage);
    obj.cost_budget = st.cost_budget;
    obj.reward_budget = st.reward_budget;
    if (st.stage == StageKind::MinCost) {
      obj.active_costs = violating_costs(st);
      if (obj.active_costs.empty()) {
        obj.kind = StageKind::MaxReward;
        rec.stage = StageKind::MaxReward;
        rec.min_cost_skipped = true;
      }
    }
    const PolicyParams* frz = obj.kind == StageKind::Projection ? &*frozen : nullptr;
    AscendResult up =
        ascend(loop.params(), s.batch, s.est, obj, cfg.optimizer, loop.adam(), loop.rng(), frz);
    ++st.iter_in_stage;
    loop.finish(std::move(rec), s, &up);
  }
  loop.result().final_state = st;
  return std::move(loop.result());
}

namespace {

// Fixed-schedule loop used by the baselines.
RunResult run_baseline(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed,
                       const std::function<AscendResult(Loop&, const Sample&, int,
                                                        IterationRecord&)>& update) {
  Loop loop(spec, cfg, seed);
  for (int k = 0; k < cfg.num_iterations; ++k) {
    Sample s = loop.sample(k);
    IterationRecord rec;
    rec.iter = k;
    rec.stage = StageKind::MaxReward;
    AscendResult up = update(loop, s, k, rec);
    rec.stage = up.log.stage;
    loop.finish(std::move(rec), s, &up);
  }
  BudgetState st = BudgetState::initial(cfg.stage.desired, cfg.stage.desired,
                                        cfg.stage.queue_capacity);
  if (!loop.result().records.empty()) st.cost_budget = loop.result().records.back().cost_budget;
  loop.result().final_state = st;
  return std::move(loop.result());
}

}  // namespace

RunResult run_ipo(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  return run_baseline(spec, cfg, seed, [&](Loop& loop, const Sample& s, int, IterationRecord& rec) {
    rec.cost_budget = cfg.stage.desired;
    return ipo_step(loop.params(), s.batch, s.est, cfg.stage.desired, loop.step_config(),
                    loop.adam(), loop.rng());
  });
}

RunResult run_ipo_c(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  CurriculumSchedule sched;
  sched.d_init = cfg.stage.d0;
  sched.d_final = cfg.stage.desired;
  sched.decay_iters = cfg.curriculum_decay_iters;
  sched.shape = cfg.curriculum_shape;
  sched.validate();
  return run_baseline(spec, cfg, seed, [&](Loop& loop, const Sample& s, int k, IterationRecord& rec) {
    rec.cost_budget = curriculum_budget(sched, k);
    return ipo_step(loop.params(), s.batch, s.est, rec.cost_budget, loop.step_config(),
                    loop.adam(), loop.rng());
  });
}

RunResult run_ppo_lag(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  LagrangeState lag = LagrangeState::initial(spec.num_costs(), cfg.lagrange_init, cfg.lagrange_lr,
                                             cfg.lagrange_upper_bound);
  return run_baseline(spec, cfg, seed, [&](Loop& loop, const Sample& s, int, IterationRecord& rec) {
    rec.cost_budget = cfg.stage.desired;
    LagrangeStepResult r = ppo_lag_step(loop.params(), lag, s.batch, s.est, cfg.stage.desired,
                                        loop.step_config(), loop.adam(), loop.rng());
    lag = r.lagrange;
    rec.multipliers = lag.multipliers;
    return r.update;
  });
}

RunResult run_crpo(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  return run_baseline(spec, cfg, seed, [&](Loop& loop, const Sample& s, int, IterationRecord& rec) {
    rec.cost_budget = cfg.stage.desired;
    CrpoStepResult r = crpo_step(loop.params(), s.batch, s.est, cfg.stage.desired, cfg.crpo_tol,
                                 loop.step_config(), loop.adam(), loop.rng());
    if (r.corrected_constraint >= 0) rec.event = "cost-" + std::to_string(r.corrected_constraint);
    return r.update;
  });
}

RunResult run_algorithm(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed) {
  if (cfg.algorithm == "acpo") return run_acpo(spec, cfg, seed);
  if (cfg.algorithm == "ipo") return run_ipo(spec, cfg, seed);
  if (cfg.algorithm == "ipo-c") return run_ipo_c(spec, cfg, seed);
  if (cfg.algorithm == "ppo-lag") return run_ppo_lag(spec, cfg, seed);
  if (cfg.algorithm == "crpo") return run_crpo(spec, cfg, seed);
  throw std::invalid_argument("unknown algorithm: " + cfg.algorithm);
}

}  // namespace acpo
