// Command-line front end: train, evaluate, verify and report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "acpo/harness.hpp"
#include "acpo/verification.hpp"

namespace fs = std::filesystem;
using namespace acpo;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* opt = cmd->add_option("--config", f.config, "run configuration (JSON)");
  if (config_required) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "override the run seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "rollout worker threads")->check(CLI::PositiveNumber);
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? config_from_json(nlohmann::json::object()) : load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.train.workers = *f.workers;
  if (!f.out.empty()) c.output_dir = f.out;
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

int cmd_run(const CommonFlags& f) {
  const RunConfig c = resolve(f);
  execute_run(c, c.output_dir);
  std::cout << read_json(fs::path(c.output_dir) / "summary.json").dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& run_dir, const std::string& checkpoint, int rollouts,
                 std::optional<std::uint64_t> seed) {
  const fs::path dir(run_dir);
  const RunConfig c = load_config(dir / "config.json");
  const fs::path policy_path = checkpoint.empty() ? dir / "policy.json" : fs::path(checkpoint);
  const PolicyParams params = policy_from_json(read_json(policy_path));
  const CmdpSpec spec = build_environment(c);
  const int n = rollouts > 0 ? rollouts : c.evaluation_rollouts;
  const Evaluation e = evaluate_policy(spec, params, n, seed.value_or(c.seed));
  nlohmann::json j = to_json(e);
  j["policy"] = policy_path.string();
  write_file(dir / "evaluation.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, const CommonFlags& f, bool failures_only) {
  const RunConfig c = resolve(f);
  const std::uint64_t seed = f.seed.value_or(0);
  const fs::path out = f.out.empty() ? fs::path("verify") / suite : fs::path(f.out);
  SuiteResult result;
  if (suite == "lemma") {
    result = run_lemma_suite(seed);
  } else if (suite == "gap") {
    result = run_gap_suite(seed);
  } else if (suite == "gradient") {
    result = run_gradient_suite(seed);
  } else {
    if (c.train.algorithm != "acpo") throw std::invalid_argument("--suite bounds needs an acpo config");
    // The checked run is kept next to the verdicts.
    const RunResult run = execute_run(c, out / "run");
    BudgetBoundConfig bounds;
    bounds.n1 = c.train.stage.n1;
    bounds.n2 = c.train.stage.n2;
    bounds.barrier_t = c.train.barrier_t;
    bounds.configured_delta = c.train.optimizer.kl_stop;
    result = check_run_bounds(build_environment(c), run, bounds);
  }
  write_file(out / "verdicts.json", to_json(result).dump(2) + "\n");
  const std::string table = summary_table(result, failures_only);
  write_file(out / "summary.txt", summary_table(result));
  std::cout << table;
  return result.ok() ? 0 : 1;
}

int cmd_front(const CommonFlags& f, double lo, double hi, int points) {
  const RunConfig c = resolve(f);
  const fs::path out = f.out.empty() ? fs::path("front") / c.environment.kind : fs::path(f.out);
  const std::string csv = front_csv(build_environment(c), lo, hi, points);
  write_file(out / "front.csv", csv);
  const auto cols = read_numeric_csv(out / "front.csv");
  write_file(out / "plots" / "front.svg",
             svg_line_chart("Exact reward-cost front (" + c.environment.kind + ")", "budget d",
                            {{"J_star(d)", cols.at("d"), cols.at("J_star")}}));
  std::cout << csv;
  return 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<nlohmann::json> summaries;
  for (const auto& d : dirs) summaries.push_back(read_json(fs::path(d) / "summary.json"));
  const std::string table = compare_table(summaries);
  if (!out.empty()) write_file(out, table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_log_level_from_env();
  CLI::App app{"Adaptive constrained policy optimization on exact gridworld CMDPs"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "train one configuration and write its artifacts");
  add_common(run, run_flags, true);

  std::string eval_dir, eval_checkpoint;
  int eval_rollouts = 0;
  std::optional<std::uint64_t> eval_seed;
  auto* evaluate = app.add_subcommand("evaluate", "exact and sampled returns of a stored policy");
  evaluate->add_option("run_dir", eval_dir, "directory written by `run`")->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--checkpoint", eval_checkpoint, "policy file (default: run_dir/policy.json)")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--rollouts", eval_rollouts, "sampled episodes (default: from config)");
  evaluate->add_option("--seed", eval_seed, "rollout seed (default: run seed)");

  CommonFlags verify_flags;
  std::string suite = "bounds";
  bool failures_only = false;
  auto* verify = app.add_subcommand("verify", "run a bound verification suite; exit 0 iff all pass");
  add_common(verify, verify_flags, false);
  verify->add_option("--suite", suite, "bounds | lemma | gap | gradient")
      ->check(CLI::IsMember({"bounds", "lemma", "gap", "gradient"}));
  verify->add_flag("--failures-only", failures_only, "print only failing reports");

  CommonFlags front_flags;
  double front_lo = 0.05, front_hi = 3.0;
  int front_points = 30;
  auto* front = app.add_subcommand("front", "exact reward-cost front of the configured environment");
  add_common(front, front_flags, false);
  front->add_option("--lo", front_lo, "smallest budget");
  front->add_option("--hi", front_hi, "largest budget");
  front->add_option("--points", front_points, "number of budgets");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "summary table over run directories");
  compare->add_option("run_dirs", compare_dirs, "directories written by `run`")->required()
      ->check(CLI::ExistingDirectory);
  compare->add_option("--out", compare_out, "also write the table to this file");

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "redraw the SVG charts of a run directory");
  plot->add_option("run_dir", plot_dir, "directory written by `run`")->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*evaluate) return cmd_evaluate(eval_dir, eval_checkpoint, eval_rollouts, eval_seed);
    if (*verify) return cmd_verify(suite, verify_flags, failures_only);
    if (*front) return cmd_front(front_flags, front_lo, front_hi, front_points);
    if (*compare) return cmd_compare(compare_dirs, compare_out);
    if (*plot) {
      write_plots(plot_dir);
      std::cout << "wrote " << (fs::path(plot_dir) / "plots").string() << "\n";
      return 0;
    }
  } catch (const ConfigError& ex) {
    std::cerr << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
