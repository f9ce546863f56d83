#include "acpo/verification.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "acpo/gridworld.hpp"

namespace acpo {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double normal01(Rng& rng) {
  // Box-Muller on (0, 1] draws.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (int s = 0; s < logits.rows(); ++s) out.row(s) = softmax(logits.row(s).transpose()).transpose();
  return out;
}

Matrix gaussian(Rng& rng, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = scale * normal01(rng);
  return m;
}

}  // namespace

int SuiteResult::passed() const {
  int n = 0;
  for (const auto& r : reports) n += (!r.skipped && r.pass);
  return n;
}

int SuiteResult::failed() const {
  int n = 0;
  for (const auto& r : reports) n += (!r.skipped && !r.pass);
  return n;
}

int SuiteResult::skipped() const {
  int n = 0;
  for (const auto& r : reports) n += r.skipped;
  return n;
}

bool SuiteResult::ok() const { return failed() == 0 && passed() > 0; }

nlohmann::json to_json(const SuiteResult& r) {
  nlohmann::json j;
  j["suite"] = r.suite;
  j["passed"] = r.passed();
  j["failed"] = r.failed();
  j["skipped"] = r.skipped();
  j["seconds"] = r.seconds;
  j["reports"] = nlohmann::json::array();
  for (const auto& rep : r.reports) j["reports"].push_back(to_json(rep));
  return j;
}

std::string summary_table(const SuiteResult& r, bool failures_only) {
  std::string out = fmt::format("{:<42} {:<28} {:>13} {:>13} {:>11}  {}\n", "bound", "context",
                                "lhs", "rhs", "slack", "verdict");
  for (const auto& rep : r.reports) {
    if (failures_only && (rep.pass || rep.skipped)) continue;
    const char* verdict = rep.skipped ? "skipped" : (rep.pass ? "pass" : "FAIL");
    out += fmt::format("{:<42} {:<28} {:>13.6g} {:>13.6g} {:>11.3g}  {}\n", rep.name, rep.context,
                       rep.lhs, rep.rhs, rep.slack, verdict);
  }
  out += fmt::format("{}: {} passed, {} failed, {} skipped in {:.2f}s\n", r.suite, r.passed(),
                     r.failed(), r.skipped(), r.seconds);
  return out;
}

CmdpSpec random_cmdp(Rng& rng, int num_states, int num_actions, int num_costs) {
  if (num_states < 1 || num_actions < 1 || num_costs < 0) {
    throw std::invalid_argument("random_cmdp needs positive sizes");
  }
  const double discount = 0.8 + 0.19 * uniform01(rng);
  CmdpSpec spec = make_empty_spec(num_states, num_actions, num_costs, discount, 200);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      double total = 0.0;
      for (int n = 0; n < num_states; ++n) {
        // Squaring spreads the mass unevenly; the floor keeps rows dense.
        const double w = 0.01 + std::pow(uniform01(rng), 2);
        spec.p(s, a, n) = w;
        total += w;
      }
      for (int n = 0; n < num_states; ++n) spec.p(s, a, n) /= total;
      spec.reward(s, a) = 2.0 * uniform01(rng) - 1.0;
      for (auto& c : spec.costs) c(s, a) = uniform01(rng);
    }
  }
  for (int s = 0; s < num_states; ++s) spec.initial_dist[s] = 0.05 + uniform01(rng);
  spec.initial_dist /= spec.initial_dist.sum();
  spec.validate();
  return spec;
}

SuiteResult run_lemma_suite(std::uint64_t seed, int num_specs, int pairs_per_spec) {
  const auto start = Clock::now();
  SuiteResult out;
  out.suite = "lemma";
  Rng rng = make_rng(seed, "lemma");
  static constexpr double kStepScales[] = {0.05, 0.3, 1.0, 3.0};
  for (int i = 0; i < num_specs; ++i) {
    const int S = uniform_int(rng, 2, 8);
    const int A = uniform_int(rng, 2, 4);
    const CmdpSpec spec = random_cmdp(rng, S, A, 1 + i % 2);
    for (int k = 0; k < pairs_per_spec; ++k) {
      const Matrix old_logits = gaussian(rng, S, A, 0.5 + 2.5 * uniform01(rng));
      const Matrix new_logits = old_logits + gaussian(rng, S, A, kStepScales[k % 4]);
      auto reps = check_performance_bound(spec, softmax_rows(old_logits), softmax_rows(new_logits));
      for (auto& r : reps) {
        r.context = fmt::format("spec={} S={} A={} pair={}", i, S, A, k);
        out.reports.push_back(std::move(r));
      }
    }
  }
  out.seconds = seconds_since(start);
  return out;
}

GapInstance random_binding_gap_instance(Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    GapInstance inst;
    inst.spec = random_cmdp(rng, 2, 2, 1);
    inst.reference_probs.resize(2, 2);
    for (int s = 0; s < 2; ++s) {
      const double p = 0.2 + 0.6 * uniform01(rng);
      inst.reference_probs(s, 0) = p;
      inst.reference_probs(s, 1) = 1.0 - p;
    }
    inst.budget = 0.0;
    const GapAffine aff = gap_affine_terms(inst);
    if (aff.fs.cwiseAbs().sum() < 1e-3) continue;
    // Constraint value at the unconstrained optimum and its minimum over the box.
    double h_best = aff.h0;
    double h_min = aff.h0;
    for (int s = 0; s < 2; ++s) {
      if (aff.fs[s] > 0.0) h_best += aff.hs[s];
      h_min += std::min(0.0, aff.hs[s]);
    }
    if (h_best - h_min < 1e-2) continue;
    // Budget strictly between the two so the constraint binds and the
    // interior is nonempty.
    inst.budget = h_min + (0.25 + 0.5 * uniform01(rng)) * (h_best - h_min);
    return inst;
  }
  throw NumericError("could not draw a binding gap instance");
}

SuiteResult run_gap_suite(std::uint64_t seed, const GapSuiteConfig& cfg) {
  const auto start = Clock::now();
  SuiteResult out;
  out.suite = "gap";
  Rng rng = make_rng(seed, "gap");
  std::vector<GapInstance> instances;
  for (int i = 0; i < cfg.instances; ++i) instances.push_back(random_binding_gap_instance(rng));

  std::map<double, double> envelope;
  double tau = 0.0;
  for (double t : cfg.t_values) {
    double env = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < instances.size(); ++i) {
      GapReport g = check_ipo_gap(instances[i], t, cfg.grid_resolution);
      g.report.context = fmt::format("instance={} t={:g} gap={:.5f}", i, t, g.gap);
      if (!g.report.skipped) {
        env = std::max(env, g.gap);
        tau = std::max(tau, g.tau_grid);
      }
      out.reports.push_back(g.report);
    }
    envelope[t] = env;
  }
  for (double t : cfg.t_values) {
    const auto twice = envelope.find(2.0 * t);
    if (twice == envelope.end()) continue;
    BoundReport r;
    r.name = "gap-envelope-scaling";
    r.context = fmt::format("t={:g} -> {:g}", t, 2.0 * t);
    if (!std::isfinite(envelope[t]) || !std::isfinite(twice->second)) {
      r.skipped = true;
      r.reason = "no checked instance at one of the two values";
    } else {
      r.lhs = twice->second;
      r.rhs = envelope[t] / 2.0 + tau;
    }
    r.settle();
    out.reports.push_back(r);
  }
  out.seconds = seconds_since(start);
  return out;
}

SuiteResult check_run_bounds(const CmdpSpec& spec, const RunResult& run,
                             const BudgetBoundConfig& bounds) {
  const auto start = Clock::now();
  SuiteResult out;
  out.suite = "bounds";
  out.reports = check_theorem_budget_bounds(spec, run, bounds);
  out.seconds = seconds_since(start);
  return out;
}

SuiteResult run_bounds_suite(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed,
                             const BudgetBoundConfig& bounds, RunResult* run_out) {
  if (cfg.algorithm != "acpo") throw std::invalid_argument("bounds suite needs an acpo config");
  const auto start = Clock::now();
  RunResult run = run_acpo(spec, cfg, seed);
  SuiteResult out = check_run_bounds(spec, run, bounds);
  out.seconds = seconds_since(start);
  if (run_out) *run_out = std::move(run);
  return out;
}

namespace {

bool straddles(double a, double b, double point) { return (a - point) * (b - point) <= 0.0; }

// True when moving one weight by +-h crosses a point where the objective is
// not differentiable: a clip edge of some likelihood ratio or the switch of a
// barrier term to its linear continuation.
bool stencil_has_kink(const PolicyParams& at, const TrajectoryBatch& batch,
                      const EstimateSet& est, const StageObjective& obj,
                      const PolicyParams* frozen, double h) {
  const double x0 = -1.0 / (obj.barrier_t * obj.barrier_cap);
  for (Eigen::Index i = 0; i < at.weights().size(); ++i) {
    PolicyParams plus = at;
    PolicyParams minus = at;
    plus.weights().data()[i] += h;
    minus.weights().data()[i] -= h;
    const Matrix lp = plus.log_prob_table();
    const Matrix lm = minus.log_prob_table();
    for (int j = 0; j < batch.size(); ++j) {
      const int s = batch.state[j];
      const int a = batch.action[j];
      const double rp = std::exp(lp(s, a) - batch.old_log_prob[j]);
      const double rm = std::exp(lm(s, a) - batch.old_log_prob[j]);
      if (straddles(rp, rm, 1.0 + obj.clip_ratio) || straddles(rp, rm, 1.0 - obj.clip_ratio)) {
        return true;
      }
    }
    const auto bp = stage_objective_value(batch, est, plus, obj, frozen).barrier_arguments;
    const auto bm = stage_objective_value(batch, est, minus, obj, frozen).barrier_arguments;
    for (std::size_t b = 0; b < bp.size(); ++b) {
      if (straddles(bp[b], bm[b], x0)) return true;
    }
  }
  return false;
}

}  // namespace

SuiteResult run_gradient_suite(std::uint64_t seed, int triples, double h) {
  const auto start = Clock::now();
  SuiteResult out;
  out.suite = "gradient";
  Rng rng = make_rng(seed, "gradient");
  const CmdpSpec spec = build_gridworld("two-cost", 3, 0);
  const int S = spec.num_states;
  const int A = spec.num_actions;
  for (int k = 0; k < triples; ++k) {
    const auto kind = static_cast<StageKind>(k % 3);
    const bool linear = (k / 3) % 2 == 1;
    BoundReport r;
    r.name = "gradient-" + to_string(kind);
    // Difference quotients across a kink say nothing about the gradient, so
    // such draws are replaced.
    int redrawn = 0;
    for (;; ++redrawn) {
      if (redrawn == 20) throw NumericError("no kink-free gradient check point found");
      PolicyParams sampler = linear
          ? PolicyParams::linear(Matrix::Identity(S, S) + gaussian(rng, S, S, 0.3), A)
          : PolicyParams::tabular(S, A);
      sampler.weights() = gaussian(rng, sampler.weights().rows(), A, 1.0);
      const TrajectoryBatch batch = collect(spec, sampler, 300, seed * 1000 + k * 20 + redrawn);
      EstimatorConfig ecfg;
      ecfg.gamma = spec.discount;
      const EstimateSet est = estimate(batch, Critic::zeros(S, spec.num_costs()), ecfg);

      // Evaluate away from the sampling policy so the clipped terms are active.
      PolicyParams at = sampler;
      at.weights() += gaussian(rng, at.weights().rows(), A, 0.15);
      PolicyParams frozen = sampler;
      frozen.weights() += gaussian(rng, frozen.weights().rows(), A, 0.25);

      StageObjective obj;
      obj.kind = kind;
      obj.cost_budget = est.episode_cost_returns.array() + 0.3 + uniform01(rng);
      obj.reward_budget = est.episode_reward_return - 0.3 - uniform01(rng);
      obj.active_costs = {0, 1};
      const PolicyParams* fr = kind == StageKind::Projection ? &frozen : nullptr;
      if (stencil_has_kink(at, batch, est, obj, fr, h)) continue;

      const Matrix g = surrogate_gradient(at, batch, est, obj, fr);
      Matrix fd(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        PolicyParams plus = at;
        PolicyParams minus = at;
        plus.weights().data()[i] += h;
        minus.weights().data()[i] -= h;
        fd.data()[i] = (stage_objective_value(batch, est, plus, obj, fr).objective -
                        stage_objective_value(batch, est, minus, obj, fr).objective) /
                       (2.0 * h);
      }
      r.lhs = (g - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
      break;
    }
    r.context = fmt::format("triple={} policy={} redrawn={}", k, linear ? "linear" : "tabular",
                            redrawn);
    r.rhs = 1e-4;
    r.settle();
    out.reports.push_back(std::move(r));
  }
  out.seconds = seconds_since(start);
  return out;
}

}  // namespace acpo
