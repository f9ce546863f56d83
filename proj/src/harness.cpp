#include "acpo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "acpo/oracle.hpp"

namespace acpo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

// Walks one JSON object, recording which keys were consumed so that the rest
// can be reported as unknown.
class Reader {
 public:
  Reader(const json* obj, std::string path, std::vector<std::string>& issues,
         std::map<std::string, std::string>& provenance)
      : obj_(obj), path_(std::move(path)), issues_(issues), provenance_(provenance) {
    if (obj_ && !obj_->is_object()) {
      issues_.push_back(label("") + "expected an object");
      obj_ = nullptr;
    }
  }

  Reader child(const std::string& key) {
    seen_.push_back(key);
    const json* sub = (obj_ && obj_->contains(key)) ? &obj_->at(key) : nullptr;
    return Reader(sub, qualified(key), issues_, provenance_);
  }

  void get(const std::string& key, int& field) {
    if (const json* v = take(key)) {
      if (v->is_number_integer() && v->get<long long>() >= INT32_MIN &&
          v->get<long long>() <= INT32_MAX) {
        field = v->get<int>();
      } else {
        issue(key, "expected an integer");
      }
    }
  }

  void get(const std::string& key, std::uint64_t& field) {
    if (const json* v = take(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0)) {
        field = v->get<std::uint64_t>();
      } else {
        issue(key, "expected a non-negative integer");
      }
    }
  }

  void get(const std::string& key, double& field) {
    if (const json* v = take(key)) {
      if (v->is_number()) {
        field = v->get<double>();
      } else {
        issue(key, "expected a number");
      }
    }
  }

  void get(const std::string& key, bool& field) {
    if (const json* v = take(key)) {
      if (v->is_boolean()) {
        field = v->get<bool>();
      } else {
        issue(key, "expected true or false");
      }
    }
  }

  void get(const std::string& key, std::string& field) {
    if (const json* v = take(key)) {
      if (v->is_string()) {
        field = v->get<std::string>();
      } else {
        issue(key, "expected a string");
      }
    }
  }

  void get(const std::string& key, std::optional<double>& field) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        field.reset();
      } else if (v->is_number()) {
        field = v->get<double>();
      } else {
        issue(key, "expected a number or null");
      }
    }
  }

  /// Scalar or array budget; an empty result means "not given".
  void get(const std::string& key, std::vector<double>& field) {
    if (const json* v = take(key)) {
      if (v->is_number()) {
        field = {v->get<double>()};
        return;
      }
      if (v->is_array() && !v->empty() &&
          std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
        field = v->get<std::vector<double>>();
        return;
      }
      issue(key, "expected a number or a non-empty array of numbers");
    }
  }

  void finish() {
    if (!obj_) return;
    for (const auto& item : obj_->items()) {
      if (std::find(seen_.begin(), seen_.end(), item.key()) == seen_.end()) {
        issue(item.key(), "unknown key");
      }
    }
  }

  void issue(const std::string& key, const std::string& msg) {
    issues_.push_back(label(key) + msg);
  }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void mark(const std::string& key, const std::string& origin) { provenance_[qualified(key)] = origin; }

 private:
  const json* take(const std::string& key) {
    seen_.push_back(key);
    if (obj_ && obj_->contains(key)) {
      provenance_[qualified(key)] = "config";
      return &obj_->at(key);
    }
    provenance_.emplace(qualified(key), "default");
    return nullptr;
  }

  std::string label(const std::string& key) const {
    const std::string q = key.empty() ? path_ : qualified(key);
    return (q.empty() ? std::string("<root>") : q) + ": ";
  }

  const json* obj_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::map<std::string, std::string>& provenance_;
  std::vector<std::string> seen_;
};

int costs_of_kind(const std::string& kind) { return kind == "two-cost" ? 2 : 1; }

Vector resolve_budget(Reader& r, const std::string& key, const std::vector<double>& given,
                      double fallback, int m) {
  if (given.empty()) {
    r.mark(key, "default");
    return Vector::Constant(m, fallback);
  }
  if (static_cast<int>(given.size()) == m) {
    return Eigen::Map<const Vector>(given.data(), m);
  }
  if (given.size() == 1) {
    r.mark(key, "broadcast");
    return Vector::Constant(m, given[0]);
  }
  r.issue(key, fmt::format("expected 1 or {} entries, got {}", m, given.size()));
  return Vector::Constant(m, fallback);
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string num(double x) {
  if (std::isnan(x)) return "";
  return fmt::format("{:.10g}", x);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::invalid_argument("invalid config:\n  " + join(issues, "\n  ")),
      issues_(std::move(issues)) {}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  std::vector<std::string> issues;
  Reader root(&j, "", issues, c.provenance);
  TrainConfig& t = c.train;

  root.get("algorithm", t.algorithm);
  root.get("seed", c.seed);
  root.get("num_iterations", t.num_iterations);
  root.get("batch_size", t.batch_size);
  root.get("workers", t.workers);
  root.get("checkpoint_every", c.checkpoint_every);
  root.get("output_dir", c.output_dir);
  root.get("evaluation_rollouts", c.evaluation_rollouts);
  std::string policy_class = to_string(t.policy_class);
  root.get("policy_class", policy_class);

  Reader env = root.child("environment");
  GridworldParams& e = c.environment;
  env.get("kind", e.kind);
  env.get("size", e.size);
  env.get("seed", e.seed);
  env.get("slip", e.slip);
  env.get("step_penalty", e.step_penalty);
  env.get("discount", e.discount);
  env.get("horizon", e.horizon);
  env.finish();

  Reader stage = root.child("stage");
  StageConfig& s = t.stage;
  std::vector<double> d0, desired;
  stage.get("n1", s.n1);
  stage.get("n2", s.n2);
  stage.get("n_e", s.n_e);
  stage.get("k_p", s.k_p);
  stage.get("enlarge_gain", s.enlarge_gain);
  stage.get("d0", d0);
  stage.get("desired", desired);
  stage.get("finish_tol", s.finish_tol);
  stage.get("converge_window", s.converge_window);
  stage.get("converge_rel_tol", s.converge_rel_tol);
  stage.get("queue_capacity", s.queue_capacity);
  stage.get("reset_policy_on_projection", s.reset_policy_on_projection);
  stage.finish();

  Reader est = root.child("estimator");
  EstimatorConfig& ec = t.estimator;
  est.get("gamma", ec.gamma);
  est.get("lambda_reward", ec.lambda_reward);
  est.get("lambda_cost", ec.lambda_cost);
  est.get("value_fit_epochs", ec.value_fit_epochs);
  est.get("value_learning_rate", ec.value_learning_rate);
  est.get("normalize_reward_advantages", ec.normalize_reward_advantages);
  est.get("center_cost_advantages", ec.center_cost_advantages);
  est.finish();

  Reader opt = root.child("optimizer");
  opt.get("epochs", t.optimizer.epochs);
  opt.get("num_minibatches", t.optimizer.num_minibatches);
  opt.get("learning_rate", t.optimizer.learning_rate);
  opt.get("kl_stop", t.optimizer.kl_stop);
  opt.get("persistent_moments", t.optimizer.persistent_moments);
  opt.finish();

  Reader obj = root.child("objective");
  obj.get("barrier_t", t.barrier_t);
  obj.get("barrier_cap", t.barrier_cap);
  obj.get("clip_ratio", t.clip_ratio);
  obj.finish();

  Reader base = root.child("baselines");
  std::string shape = to_string(t.curriculum_shape);
  base.get("lagrange_lr", t.lagrange_lr);
  base.get("lagrange_init", t.lagrange_init);
  base.get("lagrange_upper_bound", t.lagrange_upper_bound);
  base.get("crpo_tol", t.crpo_tol);
  base.get("curriculum_decay_iters", t.curriculum_decay_iters);
  base.get("curriculum_shape", shape);
  base.finish();
  root.finish();

  // Field-level range checks, collected rather than thrown one by one.
  auto check = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) issues.push_back(field + ": " + msg);
  };
  static const std::vector<std::string> kAlgorithms = {"acpo", "ipo", "ipo-c", "ppo-lag", "crpo"};
  check(std::find(kAlgorithms.begin(), kAlgorithms.end(), t.algorithm) != kAlgorithms.end(),
        "algorithm", "must be one of acpo, ipo, ipo-c, ppo-lag, crpo");
  check(t.num_iterations >= 1, "num_iterations", "must be >= 1");
  check(t.batch_size >= 1, "batch_size", "must be >= 1");
  check(t.workers >= 1, "workers", "must be >= 1");
  check(c.checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
  check(!c.output_dir.empty(), "output_dir", "must not be empty");
  check(c.evaluation_rollouts >= 2, "evaluation_rollouts", "must be >= 2");
  try {
    t.policy_class = parameterization_from_string(policy_class);
  } catch (const std::invalid_argument&) {
    issues.push_back("policy_class: must be tabular-softmax or linear-softmax");
  }
  try {
    t.curriculum_shape = schedule_shape_from_string(shape);
  } catch (const std::invalid_argument&) {
    issues.push_back("baselines.curriculum_shape: must be linear or exponential");
  }

  const auto& kinds = gridworld_kinds();
  check(std::find(kinds.begin(), kinds.end(), e.kind) != kinds.end(), "environment.kind",
        "must be one of hazard-goal, trap, two-cost");
  check(e.size >= 3, "environment.size", "must be >= 3");
  check(e.slip >= 0.0 && e.slip <= 1.0, "environment.slip", "must lie in [0, 1]");
  check(e.discount > 0.0 && e.discount < 1.0, "environment.discount", "must lie in (0, 1)");
  check(e.horizon >= 1, "environment.horizon", "must be >= 1");

  check(s.n1 >= 1, "stage.n1", "must be >= 1");
  check(s.n2 >= 1, "stage.n2", "must be >= 1");
  check(s.n_e >= 1, "stage.n_e", "must be >= 1");
  check(s.k_p > 0.0 && s.k_p <= 1.0, "stage.k_p", "must lie in (0, 1]");
  check(!s.enlarge_gain || *s.enlarge_gain > 0.0, "stage.enlarge_gain", "must be positive");
  check(s.finish_tol >= 0.0, "stage.finish_tol", "must be >= 0");
  check(s.converge_window >= 2, "stage.converge_window", "must be >= 2");
  check(s.converge_rel_tol >= 0.0, "stage.converge_rel_tol", "must be >= 0");
  check(s.queue_capacity >= s.converge_window, "stage.queue_capacity",
        "must be >= stage.converge_window");

  check(ec.gamma > 0.0 && ec.gamma < 1.0, "estimator.gamma", "must lie in (0, 1)");
  check(ec.lambda_reward >= 0.0 && ec.lambda_reward <= 1.0, "estimator.lambda_reward",
        "must lie in [0, 1]");
  check(ec.lambda_cost >= 0.0 && ec.lambda_cost <= 1.0, "estimator.lambda_cost",
        "must lie in [0, 1]");
  check(ec.value_fit_epochs >= 1, "estimator.value_fit_epochs", "must be >= 1");
  check(ec.value_learning_rate > 0.0, "estimator.value_learning_rate", "must be positive");

  check(t.optimizer.epochs >= 1, "optimizer.epochs", "must be >= 1");
  check(t.optimizer.num_minibatches >= 1, "optimizer.num_minibatches", "must be >= 1");
  check(t.optimizer.learning_rate > 0.0, "optimizer.learning_rate", "must be positive");
  check(t.optimizer.kl_stop > 0.0, "optimizer.kl_stop", "must be positive");

  check(t.barrier_t > 0.0, "objective.barrier_t", "must be positive");
  check(t.barrier_cap > 0.0, "objective.barrier_cap", "must be positive");
  check(t.clip_ratio > 0.0 && t.clip_ratio < 1.0, "objective.clip_ratio", "must lie in (0, 1)");

  check(t.lagrange_lr > 0.0, "baselines.lagrange_lr", "must be positive");
  check(t.lagrange_upper_bound > 0.0, "baselines.lagrange_upper_bound", "must be positive");
  check(t.lagrange_init >= 0.0 && t.lagrange_init <= t.lagrange_upper_bound,
        "baselines.lagrange_init", "must lie in [0, lagrange_upper_bound]");
  check(t.crpo_tol >= 0.0, "baselines.crpo_tol", "must be >= 0");
  check(t.curriculum_decay_iters >= 1, "baselines.curriculum_decay_iters", "must be >= 1");

  const int m = costs_of_kind(e.kind);
  s.d0 = resolve_budget(stage, "d0", d0, 10.0, m);
  s.desired = resolve_budget(stage, "desired", desired, 1.0, m);
  check((s.d0.array() >= 0.0).all() && s.d0.allFinite(), "stage.d0", "entries must be >= 0");
  check((s.desired.array() >= 0.0).all() && s.desired.allFinite(), "stage.desired",
        "entries must be >= 0");
  check((s.d0.array() >= s.desired.array()).all(), "stage.d0",
        "entries must be >= the matching stage.desired entries");

  if (issues.empty()) {
    // Whatever the module checks catch beyond the field ranges above.
    try {
      t.validate(m);
    } catch (const std::invalid_argument& ex) {
      issues.push_back(std::string("train: ") + ex.what());
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const GridworldParams& e = c.environment;
  const StageConfig& s = t.stage;
  json j;
  j["algorithm"] = t.algorithm;
  j["seed"] = c.seed;
  j["num_iterations"] = t.num_iterations;
  j["batch_size"] = t.batch_size;
  j["workers"] = t.workers;
  j["checkpoint_every"] = c.checkpoint_every;
  j["output_dir"] = c.output_dir;
  j["evaluation_rollouts"] = c.evaluation_rollouts;
  j["policy_class"] = to_string(t.policy_class);
  j["environment"] = {{"kind", e.kind},         {"size", e.size},
                      {"seed", e.seed},         {"slip", e.slip},
                      {"discount", e.discount}, {"horizon", e.horizon}};
  j["environment"]["step_penalty"] = e.step_penalty ? json(*e.step_penalty) : json(nullptr);
  j["stage"] = {{"n1", s.n1},
                {"n2", s.n2},
                {"n_e", s.n_e},
                {"k_p", s.k_p},
                {"d0", vec_json(s.d0)},
                {"desired", vec_json(s.desired)},
                {"finish_tol", s.finish_tol},
                {"converge_window", s.converge_window},
                {"converge_rel_tol", s.converge_rel_tol},
                {"queue_capacity", s.queue_capacity},
                {"reset_policy_on_projection", s.reset_policy_on_projection}};
  j["stage"]["enlarge_gain"] = s.enlarge_gain ? json(*s.enlarge_gain) : json(nullptr);
  j["estimator"] = {{"gamma", t.estimator.gamma},
                    {"lambda_reward", t.estimator.lambda_reward},
                    {"lambda_cost", t.estimator.lambda_cost},
                    {"value_fit_epochs", t.estimator.value_fit_epochs},
                    {"value_learning_rate", t.estimator.value_learning_rate},
                    {"normalize_reward_advantages", t.estimator.normalize_reward_advantages},
                    {"center_cost_advantages", t.estimator.center_cost_advantages}};
  j["optimizer"] = {{"epochs", t.optimizer.epochs},
                    {"num_minibatches", t.optimizer.num_minibatches},
                    {"learning_rate", t.optimizer.learning_rate},
                    {"kl_stop", t.optimizer.kl_stop},
                    {"persistent_moments", t.optimizer.persistent_moments}};
  j["objective"] = {
      {"barrier_t", t.barrier_t}, {"barrier_cap", t.barrier_cap}, {"clip_ratio", t.clip_ratio}};
  j["baselines"] = {{"lagrange_lr", t.lagrange_lr},
                    {"lagrange_init", t.lagrange_init},
                    {"lagrange_upper_bound", t.lagrange_upper_bound},
                    {"crpo_tol", t.crpo_tol},
                    {"curriculum_decay_iters", t.curriculum_decay_iters},
                    {"curriculum_shape", to_string(t.curriculum_shape)}};
  return j;
}

std::string canonical_text(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& ex) {
    throw ConfigError({path.string() + ": " + ex.what()});
  }
  return config_from_json(j);
}

void save_config(const RunConfig& c, const fs::path& path) { write_text(path, canonical_text(c)); }

CmdpSpec build_environment(const RunConfig& c) { return build_gridworld(c.environment); }

void apply_log_level_from_env() {
  const char* raw = std::getenv("ACPO_LOG_LEVEL");
  if (!raw) return;
  const std::string level = raw;
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::warn("ignoring ACPO_LOG_LEVEL={}: expected error, warn, info or debug", level);
  }
}

std::string metrics_csv(const RunResult& run) {
  const int m = run.records.empty() ? 0 : static_cast<int>(run.records.front().j_cost_hat.size());
  std::string out = "iter,algorithm,stage,flag,event,min_cost_skipped,segment,J_R_hat";
  for (int i = 0; i < m; ++i) out += fmt::format(",J_C_hat_{}", i);
  for (int i = 0; i < m; ++i) out += fmt::format(",D_C_mean_{}", i);
  for (int i = 0; i < m; ++i) out += fmt::format(",d_{}", i);
  out += ",g,kl,objective,exact_J_R";
  for (int i = 0; i < m; ++i) out += fmt::format(",exact_J_C_{}", i);
  for (int i = 0; i < m; ++i) out += fmt::format(",lambda_{}", i);
  out += "\n";
  for (const auto& r : run.records) {
    out += fmt::format("{},{},{},{},{},{},{},{}", r.iter, run.algorithm, to_string(r.stage),
                       to_string(r.flag), r.event, r.min_cost_skipped ? 1 : 0, r.segment,
                       num(r.j_reward_hat));
    for (int i = 0; i < m; ++i) out += "," + num(r.j_cost_hat[i]);
    for (int i = 0; i < m; ++i) {
      out += "," + (i < r.queue_cost_mean.size() ? num(r.queue_cost_mean[i]) : std::string());
    }
    for (int i = 0; i < m; ++i) out += "," + num(r.cost_budget[i]);
    out += fmt::format(",{},{},{},{}", num(r.reward_budget), num(r.kl), num(r.objective),
                       num(r.exact_j_reward));
    for (int i = 0; i < m; ++i) out += "," + num(r.exact_j_cost[i]);
    for (int i = 0; i < m; ++i) {
      out += "," + (i < r.multipliers.size() ? num(r.multipliers[i]) : std::string());
    }
    out += "\n";
  }
  return out;
}

std::string budgets_csv(const RunResult& run) {
  const int m = run.records.empty() ? 0 : static_cast<int>(run.records.front().cost_budget.size());
  std::string out = "k,algorithm,flag";
  for (int i = 0; i < m; ++i) out += fmt::format(",d_{}", i);
  out += ",g\n";
  for (const auto& r : run.records) {
    out += fmt::format("{},{},{}", r.iter, run.algorithm, to_string(r.flag));
    for (int i = 0; i < m; ++i) out += "," + num(r.cost_budget[i]);
    out += "," + num(r.reward_budget) + "\n";
  }
  return out;
}

std::string updates_csv(const RunResult& run) {
  std::string out =
      "iter,stage,objective_before,objective_after,kl,grad_norm,epochs_run,steps,"
      "early_stopped,aborted,kl_overshoot,domain_ok\n";
  for (std::size_t k = 0; k < run.updates.size(); ++k) {
    const UpdateLog& u = run.updates[k];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", run.records[k].iter,
                       to_string(u.stage), num(u.objective_before), num(u.objective_after),
                       num(u.kl), num(u.grad_norm), u.epochs_run, u.steps, int(u.early_stopped),
                       int(u.aborted), int(u.kl_overshoot), int(u.domain_ok));
  }
  return out;
}

std::string timing_csv(const RunResult& run) {
  std::string out = "iter,wall_ms\n";
  for (const auto& r : run.records) out += fmt::format("{},{:.3f}\n", r.iter, r.wall_ms);
  return out;
}

json run_summary(const RunConfig& c, const CmdpSpec& spec, const RunResult& run) {
  json j;
  j["algorithm"] = run.algorithm;
  j["environment"] = c.environment.kind;
  j["seed"] = c.seed;
  j["iterations"] = run.records.size();
  j["terminated"] = run.terminated;
  j["desired"] = vec_json(c.train.stage.desired);
  if (!run.records.empty()) {
    const auto& last = run.records.back();
    j["final_exact_J_R"] = last.exact_j_reward;
    j["final_exact_J_C"] = vec_json(last.exact_j_cost);
  }
  const LpSolution lp = lp_solve(spec, c.train.stage.desired);
  j["lp_feasible"] = lp.feasible();
  if (lp.feasible()) j["lp_J_star"] = lp.j_star;
  return j;
}

RunResult execute_run(const RunConfig& c, const fs::path& out) {
  fs::create_directories(out);
  save_config(c, out / "config.json");
  write_text(out / "provenance.json", json(c.provenance).dump(2) + "\n");

  const CmdpSpec spec = build_environment(c);
  spdlog::info("{} on {} (seed {}) -> {}", c.train.algorithm, c.environment.kind, c.seed,
               out.string());
  RunResult run = run_algorithm(spec, c.train, c.seed);

  write_text(out / "metrics.csv", metrics_csv(run));
  write_text(out / "budgets.csv", budgets_csv(run));
  write_text(out / "updates.csv", updates_csv(run));
  write_text(out / "timing.csv", timing_csv(run));
  write_text(out / "policy.json", to_json(run.final_params).dump() + "\n");
  if (c.checkpoint_every > 0) {
    fs::create_directories(out / "checkpoints");
    // policies[k] is the policy after k updates.
    for (std::size_t k = c.checkpoint_every; k < run.policies.size(); k += c.checkpoint_every) {
      write_text(out / "checkpoints" / fmt::format("policy_{:06d}.json", k),
                 to_json(run.policies[k]).dump() + "\n");
    }
  }
  const json summary = run_summary(c, spec, run);
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_plots(out);
  spdlog::info("finished after {} iterations, terminated={}, exact J_R {:.4f}",
               run.records.size(), run.terminated,
               run.records.empty() ? 0.0 : run.records.back().exact_j_reward);
  return run;
}

bool Evaluation::reward_consistent() const {
  const double diff = std::abs(exact_j_reward - sampled_j_reward);
  return diff <= 3.0 * reward_standard_error + 1e-9 * (1.0 + std::abs(exact_j_reward));
}

Evaluation evaluate_policy(const CmdpSpec& spec, const PolicyParams& params, int rollouts,
                           std::uint64_t seed) {
  if (rollouts < 2) throw std::invalid_argument("evaluation needs at least two rollouts");
  const ExactEval ex = exact_eval(spec, params);
  const Matrix probs = params.prob_table();
  const int m = spec.num_costs();
  std::vector<double> rewards(rollouts);
  std::vector<Vector> costs(rollouts, Vector::Zero(m));
  for (int k = 0; k < rollouts; ++k) {
    EnvState env = reset(spec, make_rng(seed, "evaluation-env", k));
    Rng actions = make_rng(seed, "evaluation-actions", k);
    double scale = 1.0;
    double ret = 0.0;
    Vector cret = Vector::Zero(m);
    while (!env.done) {
      const int a = sample_categorical(probs.row(env.state_index), actions);
      const StepResult sr = step(spec, env, a);
      ret += scale * sr.reward;
      for (int i = 0; i < m; ++i) cret[i] += scale * sr.costs[i];
      scale *= spec.discount;
      if (sr.done && !sr.terminal) {
        // Horizon cut: the exact values supply the discounted tail, so the
        // sample estimates the same infinite-horizon return as exact_eval.
        ret += scale * ex.v_reward[env.state_index];
        for (int i = 0; i < m; ++i) cret[i] += scale * ex.v_cost[i][env.state_index];
      }
    }
    rewards[k] = ret;
    costs[k] = cret;
  }
  Evaluation e;
  e.rollouts = rollouts;
  e.exact_j_reward = ex.j_reward;
  e.exact_j_cost = ex.j_cost;
  const Eigen::Map<const Vector> r(rewards.data(), rollouts);
  e.sampled_j_reward = r.mean();
  e.reward_standard_error =
      std::sqrt((r.array() - r.mean()).square().sum() / (rollouts - 1) / rollouts);
  e.sampled_j_cost = Vector::Zero(m);
  e.cost_standard_error = Vector::Zero(m);
  for (int i = 0; i < m; ++i) {
    Vector ci(rollouts);
    for (int k = 0; k < rollouts; ++k) ci[k] = costs[k][i];
    e.sampled_j_cost[i] = ci.mean();
    e.cost_standard_error[i] =
        std::sqrt((ci.array() - ci.mean()).square().sum() / (rollouts - 1) / rollouts);
  }
  return e;
}

json to_json(const Evaluation& e) {
  return {{"rollouts", e.rollouts},
          {"exact_J_R", e.exact_j_reward},
          {"exact_J_C", vec_json(e.exact_j_cost)},
          {"sampled_J_R", e.sampled_j_reward},
          {"sampled_J_R_standard_error", e.reward_standard_error},
          {"sampled_J_C", vec_json(e.sampled_j_cost)},
          {"sampled_J_C_standard_error", vec_json(e.cost_standard_error)},
          {"reward_within_3_standard_errors", e.reward_consistent()}};
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<Series>& series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  const double width = 760, height = 420;
  const double left = 70, right = 180, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x1 = x0 + 1.0;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      width, height);
  out += fmt::format("<text x=\"{}\" y=\"22\" font-size=\"15\">{}</text>\n", left,
                     xml_escape(title));
  out += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
      left, top, pw, ph);
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0;
    const double yv = y0 + (y1 - y0) * k / 5.0;
    out += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1}\" x2=\"{0:.1f}\" y2=\"{2}\" stroke=\"#ddd\"/>"
        "<text x=\"{0:.1f}\" y=\"{3}\" text-anchor=\"middle\">{4:.4g}</text>\n",
        px(xv), top, top + ph, top + ph + 16, xv);
    out += fmt::format(
        "<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2}\" y2=\"{1:.1f}\" stroke=\"#ddd\"/>"
        "<text x=\"{3}\" y=\"{4:.1f}\" text-anchor=\"end\">{5:.4g}</text>\n",
        left, py(yv), left + pw, left - 6, py(yv) + 4, yv);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                     height - 12, xml_escape(x_label));

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kColors[si % 8];
    // NaN cells split the line into separate polylines.
    std::string points;
    auto flush = [&]() {
      if (!points.empty()) {
        out += fmt::format(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color,
            points);
      }
      points.clear();
    };
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      points += fmt::format("{:.1f},{:.1f} ", px(s.x[i]), py(s.y[i]));
    }
    flush();
    const double ly = top + 10 + 18 * si;
    out += fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
        "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
        left + pw + 12, ly, left + pw + 34, color, left + pw + 40, ly + 4, xml_escape(s.label));
  }
  out += "</svg>\n";
  return out;
}

std::map<std::string, std::vector<double>> read_numeric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
  const auto header = split(line);
  std::map<std::string, std::vector<double>> cols;
  for (const auto& h : header) cols[h];
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    for (std::size_t i = 0; i < header.size(); ++i) {
      double v = std::nan("");
      if (i < cells.size() && !cells[i].empty()) {
        char* end = nullptr;
        const double parsed = std::strtod(cells[i].c_str(), &end);
        if (end && *end == '\0') v = parsed;
      }
      cols[header[i]].push_back(v);
    }
  }
  return cols;
}

void write_plots(const fs::path& run_dir) {
  const auto metrics = read_numeric_csv(run_dir / "metrics.csv");
  const auto budgets = read_numeric_csv(run_dir / "budgets.csv");
  fs::create_directories(run_dir / "plots");
  const auto& iters = metrics.at("iter");

  std::vector<Series> returns;
  for (const char* col : {"exact_J_R", "J_R_hat", "g"}) {
    returns.push_back({col, iters, metrics.at(col)});
  }
  write_text(run_dir / "plots" / "returns.svg",
             svg_line_chart("Reward return and reward budget", "iteration", returns));

  std::vector<Series> costs;
  for (int i = 0;; ++i) {
    const std::string d = fmt::format("d_{}", i);
    if (!budgets.count(d)) break;
    costs.push_back({d, budgets.at("k"), budgets.at(d)});
    costs.push_back({fmt::format("exact_J_C_{}", i), iters,
                     metrics.at(fmt::format("exact_J_C_{}", i))});
  }
  write_text(run_dir / "plots" / "budgets.svg",
             svg_line_chart("Cost budgets and cost returns", "iteration", costs));
}

std::string front_csv(const CmdpSpec& spec, double lo, double hi, int points) {
  if (points < 2 || !(hi > lo) || lo < 0.0) {
    throw std::invalid_argument("front needs points >= 2 and 0 <= lo < hi");
  }
  const int m = spec.num_costs();
  std::vector<Vector> budgets;
  for (int k = 0; k < points; ++k) {
    budgets.push_back(Vector::Constant(m, lo + (hi - lo) * k / (points - 1)));
  }
  std::string out = "d,feasible,J_star";
  for (int i = 0; i < m; ++i) out += fmt::format(",J_C_{}", i);
  out += "\n";
  for (const FrontPoint& p : pareto_front(spec, budgets)) {
    out += fmt::format("{},{},{}", num(p.budget[0]), int(p.feasible),
                       p.feasible ? num(p.j_star) : std::string());
    for (int i = 0; i < m; ++i) out += "," + (p.feasible ? num(p.j_cost[i]) : std::string());
    out += "\n";
  }
  return out;
}

std::string compare_table(const std::vector<json>& summaries) {
  struct Group {
    std::vector<double> reward, worst_cost, iterations, ratio;
    int terminated = 0;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (const auto& s : summaries) {
    Group& g = groups[{s.at("environment").get<std::string>(), s.at("algorithm").get<std::string>()}];
    const double jr = s.value("final_exact_J_R", std::nan(""));
    g.reward.push_back(jr);
    double worst = -INFINITY;
    const auto jc = s.value("final_exact_J_C", std::vector<double>{});
    const auto des = s.value("desired", std::vector<double>{});
    for (std::size_t i = 0; i < jc.size() && i < des.size(); ++i) worst = std::max(worst, jc[i] - des[i]);
    g.worst_cost.push_back(worst);
    g.iterations.push_back(s.at("iterations").get<double>());
    if (s.contains("lp_J_star")) g.ratio.push_back(jr / s.at("lp_J_star").get<double>());
    g.terminated += s.value("terminated", false) ? 1 : 0;
  }
  std::string out = fmt::format("{:<13} {:<9} {:>4} {:>10} {:>10} {:>14} {:>10} {:>10}\n",
                                "environment", "algorithm", "runs", "med J_R", "med J_R/J*",
                                "med max(J_C-d)", "med iters", "terminated");
  for (const auto& [key, g] : groups) {
    out += fmt::format("{:<13} {:<9} {:>4} {:>10.4f} {:>10.3f} {:>14.4f} {:>10.0f} {:>10}\n",
                       key.first, key.second, g.reward.size(), median(g.reward), median(g.ratio),
                       median(g.worst_cost), median(g.iterations),
                       fmt::format("{}/{}", g.terminated, g.reward.size()));
  }
  return out;
}

}  // namespace acpo
