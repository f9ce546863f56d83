#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "acpo/gridworld.hpp"
#include "acpo/training.hpp"

namespace acpo {

/// Invalid configuration. `issues` holds one "field.path: message" entry per
/// problem found, so a single load reports every bad field at once.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct RunConfig {
  GridworldParams environment;
  TrainConfig train;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  ///< 0 disables intermediate checkpoints
  std::string output_dir = "runs/default";
  int evaluation_rollouts = 10;
  /// Leaf path -> "config" (given in the file), "default" or "broadcast"
  /// (scalar budget expanded to every cost signal).
  std::map<std::string, std::string> provenance;
};

/// Strict parse: unknown keys and wrong types are errors, missing keys take
/// defaults. Throws ConfigError listing every problem.
RunConfig config_from_json(const nlohmann::json& j);
/// Fully resolved form; config_from_json(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& c);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& c, const std::filesystem::path& path);
/// Canonical text of a config: sorted keys, two-space indent, trailing newline.
std::string canonical_text(const RunConfig& c);

CmdpSpec build_environment(const RunConfig& c);

/// Applies ACPO_LOG_LEVEL (error, warn, info, debug) to the default logger.
void apply_log_level_from_env();

// ---------------------------------------------------------------------------
// Tabular artifacts. All numbers use a fixed format so equal runs produce
// equal bytes.

std::string metrics_csv(const RunResult& run);
std::string budgets_csv(const RunResult& run);
std::string updates_csv(const RunResult& run);
std::string timing_csv(const RunResult& run);

/// Final-state summary written as summary.json and read back by `compare`.
nlohmann::json run_summary(const RunConfig& c, const CmdpSpec& spec, const RunResult& run);

/// Trains per `c` and writes config.json, provenance.json, metrics.csv,
/// budgets.csv, updates.csv, timing.csv, policy.json, summary.json,
/// checkpoints/ and plots/ under `out`.
RunResult execute_run(const RunConfig& c, const std::filesystem::path& out);

struct Evaluation {
  double exact_j_reward = 0.0;
  Vector exact_j_cost;
  double sampled_j_reward = 0.0;
  double reward_standard_error = 0.0;
  Vector sampled_j_cost;
  Vector cost_standard_error;
  int rollouts = 0;

  /// |exact - sampled| <= 3 standard errors for the reward.
  bool reward_consistent() const;
};

/// Exact returns plus `rollouts` sampled episodes of discounted return.
Evaluation evaluate_policy(const CmdpSpec& spec, const PolicyParams& params, int rollouts,
                           std::uint64_t seed);
nlohmann::json to_json(const Evaluation& e);

// ---------------------------------------------------------------------------
// Plots

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Polyline chart with axes, ticks and a legend.
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::vector<Series>& series);

/// Minimal reader for the comma-separated files above: header names mapped
/// to numeric columns. Non-numeric cells read as NaN.
std::map<std::string, std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

/// Writes plots/budgets.svg and plots/returns.svg from a run directory.
void write_plots(const std::filesystem::path& run_dir);

/// Exact reward-cost front over `points` budgets spread over [lo, hi] on every
/// cost simultaneously; CSV text.
std::string front_csv(const CmdpSpec& spec, double lo, double hi, int points);

/// Table of final results grouped by environment and algorithm.
std::string compare_table(const std::vector<nlohmann::json>& summaries);

}  // namespace acpo
