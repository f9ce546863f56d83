// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Run artifacts land in the directory given as
// the first argument (default: acceptance_runs).

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "acpo/harness.hpp"
#include "acpo/verification.hpp"

#ifndef ACPO_CONFIG_DIR
#define ACPO_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace acpo;

namespace {

using Clock = std::chrono::steady_clock;
constexpr int kSeeds = 5;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Outcome {
  RunConfig config;
  CmdpSpec spec;
  RunResult run;
  double j_reward = 0.0;
  Vector j_cost;
  double seconds = 0.0;
  fs::path dir;
};

Outcome train(const std::string& config_name, std::uint64_t seed, const fs::path& root) {
  Outcome o;
  o.config = load_config(fs::path(ACPO_CONFIG_DIR) / config_name);
  o.config.seed = seed;
  o.config.train.workers = 1;
  o.dir = root / fs::path(config_name).stem() / fmt::format("seed{}", seed);
  o.spec = build_environment(o.config);
  const auto t0 = Clock::now();
  o.run = execute_run(o.config, o.dir);
  o.seconds = seconds_since(t0);
  const ExactEval ev = exact_eval(o.spec, o.run.final_params);
  o.j_reward = ev.j_reward;
  o.j_cost = ev.j_cost;
  return o;
}

std::vector<Outcome> train_seeds(const std::string& config_name, const fs::path& root) {
  std::vector<Outcome> out;
  for (int s = 0; s < kSeeds; ++s) out.push_back(train(config_name, s, root));
  return out;
}

std::vector<double> rewards(const std::vector<Outcome>& runs) {
  std::vector<double> v;
  for (const auto& o : runs) v.push_back(o.j_reward);
  return v;
}

std::vector<double> costs(const std::vector<Outcome>& runs, int i) {
  std::vector<double> v;
  for (const auto& o : runs) v.push_back(o.j_cost[i]);
  return v;
}

// Cost-budget column i of a budgets.csv file.
std::vector<double> budget_trace(const fs::path& dir, int i) {
  return read_numeric_csv(dir / "budgets.csv").at(fmt::format("d_{}", i));
}

bool rises_after_falling(const std::vector<double>& d) {
  bool fell = false;
  for (std::size_t k = 1; k < d.size(); ++k) {
    if (d[k] < d[k - 1] - 1e-12) fell = true;
    if (fell && d[k] > d[k - 1] + 1e-12) return true;
  }
  return false;
}

bool non_increasing(const std::vector<double>& d) {
  for (std::size_t k = 1; k < d.size(); ++k) {
    if (d[k] > d[k - 1] + 1e-12) return false;
  }
  return true;
}

struct Verdict {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

class Report {
 public:
  void add(Verdict v) {
    std::cout << fmt::format("{} criterion {} {}: {}", v.pass ? "PASS" : "FAIL", v.id, v.name,
                             v.detail)
              << std::endl;
    all_ &= v.pass;
  }
  // A criterion that throws is a failure, not a crash of the whole binary.
  void guarded(int id, const std::string& name, const std::function<Verdict()>& body) {
    try {
      add(body());
    } catch (const std::exception& ex) {
      add({id, name, false, std::string("error: ") + ex.what()});
    }
  }
  bool all() const { return all_; }

 private:
  bool all_ = true;
};

Verdict oracle_optimality(const fs::path& root) {
  const auto runs = train_seeds("hazard-goal.json", root);
  const auto& c = runs.front().config;
  const double d_des = c.train.stage.desired[0];
  const double j_star = lp_solve(runs.front().spec, c.train.stage.desired).j_star;
  const double jr = median(rewards(runs));
  const double jc = median(costs(runs, 0));
  double slowest = 0.0;
  for (const auto& o : runs) slowest = std::max(slowest, o.seconds);
  const double tol = std::max(0.1 * d_des, c.train.stage.finish_tol);
  const bool pass = jr >= 0.9 * j_star && std::abs(jc - d_des) <= tol && slowest <= 300.0;
  return {1, "oracle-optimality", pass,
          fmt::format("median J_R {:.4f} vs 0.9*J* {:.4f} (J* {:.4f}, ratio {:.3f}); median J_C "
                      "{:.4f}, |J_C-d| {:.4f} <= {:.3f}; slowest seed {:.1f}s",
                      jr, 0.9 * j_star, j_star, jr / j_star, jc, std::abs(jc - d_des), tol,
                      slowest)};
}

struct TrapRuns {
  std::vector<Outcome> acpo, ipo, ipo_c;
};

Verdict escape(const TrapRuns& t) {
  const auto& c = t.acpo.front().config;
  const double limit = c.train.stage.desired[0] + c.train.stage.finish_tol;
  const double a = median(rewards(t.acpo));
  const double b = median(rewards(t.ipo));
  const double ca = median(costs(t.acpo, 0));
  const double cb = median(costs(t.ipo, 0));
  const bool pass = a >= 1.05 * b && ca <= limit && cb <= limit;
  return {2, "local-minimum-escape", pass,
          fmt::format("median J_R acpo {:.4f} vs ipo {:.4f} (x{:.3f}, need >= 1.05); median J_C "
                      "acpo {:.4f}, ipo {:.4f} <= {:.3f}",
                      a, b, a / b, ca, cb, limit)};
}

Verdict curriculum(const TrapRuns& t) {
  const double a = median(rewards(t.acpo));
  const double b = median(rewards(t.ipo_c));
  int adaptive = 0;
  int monotone = 0;
  for (const auto& o : t.acpo) adaptive += rises_after_falling(budget_trace(o.dir, 0));
  for (const auto& o : t.ipo_c) monotone += non_increasing(budget_trace(o.dir, 0));
  const bool pass = a >= b && adaptive >= 1 && monotone == kSeeds;
  return {3, "curriculum-comparison", pass,
          fmt::format("median J_R acpo {:.4f} vs ipo-c {:.4f}; acpo cost budget rises after "
                      "falling in {}/{} seeds; ipo-c budget monotone in {}/{} seeds",
                      a, b, adaptive, kSeeds, monotone, kSeeds)};
}

Verdict lemma() {
  const SuiteResult r = run_lemma_suite(0, 20, 25);
  const bool pass = r.ok() && r.seconds <= 60.0;
  return {4, "performance-difference-bounds", pass,
          fmt::format("500 policy pairs over 20 specs: {} reports passed, {} failed in {:.2f}s",
                      r.passed(), r.failed(), r.seconds)};
}

Verdict stage_pair_bounds(const fs::path& root) {
  RunConfig c = load_config(fs::path(ACPO_CONFIG_DIR) / "bounds-check.json");
  c.train.workers = 1;
  const fs::path dir = root / "bounds-check";
  const RunResult run = execute_run(c, dir);
  BudgetBoundConfig b;
  b.n1 = c.train.stage.n1;
  b.n2 = c.train.stage.n2;
  b.barrier_t = c.train.barrier_t;
  b.configured_delta = c.train.optimizer.kl_stop;
  const SuiteResult r = check_run_bounds(build_environment(c), run, b);
  int checkpoints = 0;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) checkpoints += e.is_regular_file();
  const bool pass = r.ok() && checkpoints > 0;
  return {5, "stage-pair-update-bounds", pass,
          fmt::format("{} iterations, {} checkpoints: {} reports passed, {} failed, {} skipped",
                      run.records.size(), checkpoints, r.passed(), r.failed(), r.skipped())};
}

Verdict barrier_gap() {
  const SuiteResult r = run_gap_suite(0);
  std::vector<std::string> envelope;
  int scaling = 0;
  for (const auto& rep : r.reports) {
    if (rep.name.rfind("gap-envelope-scaling", 0) == 0) {
      ++scaling;
      envelope.push_back(fmt::format("{} env(2t) {:.2e} <= {:.2e}", rep.context, rep.lhs, rep.rhs));
    }
  }
  const bool pass = r.ok() && scaling >= 2 && r.seconds <= 120.0;
  std::string joined;
  for (const auto& e : envelope) joined += (joined.empty() ? "" : "; ") + e;
  return {6, "barrier-optimality-gap", pass,
          fmt::format("{} passed, {} failed, {} skipped in {:.2f}s; {}", r.passed(), r.failed(),
                      r.skipped(), r.seconds, joined)};
}

Verdict multi_constraint(const fs::path& root) {
  int terminated = 0;
  int within = 0;
  int decisions = 0;
  int skipped = 0;
  int mismatches = 0;
  double worst_gap = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    const Outcome o = train("two-cost.json", s, root);
    const auto& st = o.run.final_state;
    terminated += o.run.terminated;
    bool ok = true;
    for (int i = 0; i < st.num_costs(); ++i) {
      const auto mean = st.queue_cost[i].mean();
      const double gap = mean ? std::abs(*mean - st.desired[i]) : 1e9;
      worst_gap = std::max(worst_gap, gap);
      ok = ok && gap <= o.config.train.stage.finish_tol;
    }
    within += ok && o.run.terminated;
    // Every point where a min-cost update could run: skipped exactly when no
    // queued cost mean exceeds its desired budget.
    for (const auto& r : o.run.records) {
      const bool decision = r.event == "min-cost-skipped" || r.event == "to-min-cost" ||
                            r.flag == StageKind::MinCost;
      if (!decision) continue;
      ++decisions;
      const bool satisfied = (r.queue_cost_mean.array() <= st.desired.array()).all();
      const bool was_skipped = r.event == "min-cost-skipped" || r.min_cost_skipped;
      skipped += was_skipped;
      mismatches += satisfied != was_skipped;
    }
  }
  const bool pass = within == kSeeds && decisions > 0 && skipped > 0 && mismatches == 0;
  return {7, "multi-constraint-termination", pass,
          fmt::format("{}/{} seeds terminated, {}/{} within tolerance (worst |mean D_C - d_des| "
                      "{:.4f}); {} min-cost decisions, {} skipped, {} inconsistent",
                      terminated, kSeeds, within, kSeeds, worst_gap, decisions, skipped,
                      mismatches)};
}

Verdict gradients() {
  const SuiteResult r = run_gradient_suite(0, 100, 1e-5);
  double worst = 0.0;
  int kinds[3] = {0, 0, 0};
  for (const auto& rep : r.reports) {
    worst = std::max(worst, rep.lhs);
    if (rep.name == "gradient-max-reward") ++kinds[0];
    if (rep.name == "gradient-min-cost") ++kinds[1];
    if (rep.name == "gradient-projection") ++kinds[2];
  }
  const bool pass = r.ok() && r.reports.size() == 100 && kinds[0] && kinds[1] && kinds[2];
  return {8, "gradient-integrity", pass,
          fmt::format("100 triples ({} max-reward, {} min-cost, {} projection): worst relative "
                      "error {:.2e} <= 1e-4",
                      kinds[0], kinds[1], kinds[2], worst)};
}

Verdict determinism(const TrapRuns& t, const fs::path& root) {
  const Outcome& first = t.acpo.front();
  RunConfig c = first.config;
  const fs::path again = root / "determinism-repeat";
  execute_run(c, again);
  const std::string a = slurp(first.dir / "metrics.csv");
  const std::string b = slurp(again / "metrics.csv");
  const bool pass = !a.empty() && a == b;
  return {9, "determinism", pass,
          fmt::format("trap seed {} with workers=1: metrics.csv {} bytes, repeat {} bytes, {}",
                      c.seed, a.size(), b.size(), a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::warn);
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::create_directories(root);
  const auto t0 = Clock::now();
  Report report;

  report.guarded(1, "oracle-optimality", [&] { return oracle_optimality(root); });

  TrapRuns trap;
  bool trap_ok = true;
  try {
    trap.acpo = train_seeds("trap.json", root);
    trap.ipo = train_seeds("trap-ipo.json", root);
    trap.ipo_c = train_seeds("trap-ipo-c.json", root);
  } catch (const std::exception& ex) {
    trap_ok = false;
    for (int id : {2, 3}) report.add({id, "trap comparison", false, ex.what()});
  }
  if (trap_ok) {
    report.guarded(2, "local-minimum-escape", [&] { return escape(trap); });
    report.guarded(3, "curriculum-comparison", [&] { return curriculum(trap); });
  }
  report.guarded(4, "performance-difference-bounds", lemma);
  report.guarded(5, "stage-pair-update-bounds", [&] { return stage_pair_bounds(root); });
  report.guarded(6, "barrier-optimality-gap", barrier_gap);
  report.guarded(7, "multi-constraint-termination", [&] { return multi_constraint(root); });
  report.guarded(8, "gradient-integrity", gradients);
  if (trap_ok) {
    report.guarded(9, "determinism", [&] { return determinism(trap, root); });
  } else {
    report.add({9, "determinism", false, "trap runs unavailable"});
  }

  std::cout << fmt::format("{} in {:.0f}s", report.all() ? "ALL PASS" : "SOME FAILED",
                           seconds_since(t0))
            << std::endl;
  return report.all() ? 0 : 1;
}
