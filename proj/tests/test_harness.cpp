#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "acpo/harness.hpp"

using namespace acpo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

json small_run() {
  return json{{"algorithm", "acpo"},
              {"seed", 3},
              {"num_iterations", 12},
              {"batch_size", 600},
              {"environment", {{"kind", "two-cost"}, {"size", 4}}},
              {"stage", {{"n_e", 4}, {"n1", 3}, {"n2", 2}, {"desired", 0.5}, {"d0", 5.0}}},
              {"optimizer", {{"epochs", 4}}}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("acpo-harness-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, EmptyObjectYieldsDefaultsAndRecordsProvenance) {
  const RunConfig c = config_from_json(json::object());
  EXPECT_EQ(c.train.algorithm, "acpo");
  EXPECT_EQ(c.train.batch_size, 20000);
  EXPECT_EQ(c.train.optimizer.epochs, 40);
  EXPECT_DOUBLE_EQ(c.train.optimizer.learning_rate, 3e-4);
  EXPECT_DOUBLE_EQ(c.train.estimator.gamma, 0.99);
  EXPECT_DOUBLE_EQ(c.train.estimator.lambda_reward, 0.95);
  EXPECT_DOUBLE_EQ(c.train.clip_ratio, 0.2);
  EXPECT_DOUBLE_EQ(c.train.optimizer.kl_stop, 0.02);
  EXPECT_DOUBLE_EQ(c.train.barrier_t, 25.0);
  EXPECT_EQ(c.train.stage.n1, 10);
  EXPECT_EQ(c.train.stage.n2, 5);
  EXPECT_EQ(c.train.stage.n_e, 20);
  EXPECT_DOUBLE_EQ(c.train.stage.k_p, 0.5);
  EXPECT_DOUBLE_EQ(c.train.stage.d0[0], 10.0);
  EXPECT_EQ(c.provenance.at("objective.clip_ratio"), "default");
}

TEST(Config, BroadcastsScalarBudgetsOverConstraints) {
  const RunConfig c = config_from_json(small_run());
  ASSERT_EQ(c.train.stage.desired.size(), 2);
  EXPECT_DOUBLE_EQ(c.train.stage.desired[1], 0.5);
  EXPECT_EQ(c.provenance.at("stage.desired"), "broadcast");
  EXPECT_EQ(c.provenance.at("num_iterations"), "config");
}

TEST(Config, OutOfRangeClipRatioNamesTheField) {
  json j = small_run();
  j["objective"] = {{"clip_ratio", 1.5}};
  try {
    config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_FALSE(e.issues().empty());
    EXPECT_NE(std::string(e.what()).find("clip_ratio"), std::string::npos);
  }
}

TEST(Config, ReportsEveryIssueAtOnce) {
  json j = small_run();
  j["bogus"] = 1;
  j["batch_size"] = -5;
  j["estimator"] = {{"gamma", "high"}};
  try {
    config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_GE(e.issues().size(), 3u);
  }
}

TEST(Config, RejectsBudgetVectorOfWrongLength) {
  json j = small_run();
  j["stage"]["desired"] = json::array({0.5, 0.5, 0.5});
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, CanonicalTextSurvivesARoundTrip) {
  const RunConfig c = config_from_json(small_run());
  const fs::path dir = scratch("roundtrip");
  save_config(c, dir / "config.json");
  const RunConfig back = load_config(dir / "config.json");
  EXPECT_EQ(canonical_text(back), canonical_text(c));
}

TEST(ExecuteRun, WritesArtifactsWithOneMetricsRowPerIteration) {
  const RunConfig c = config_from_json(small_run());
  const fs::path dir = scratch("artifacts");
  const RunResult run = execute_run(c, dir);
  for (const char* f : {"config.json", "provenance.json", "metrics.csv", "budgets.csv",
                        "updates.csv", "timing.csv", "policy.json", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const std::string metrics = slurp(dir / "metrics.csv");
  EXPECT_EQ(count_lines(metrics), 1 + static_cast<int>(run.records.size()));
  EXPECT_EQ(metrics.rfind("iter,algorithm,stage,flag,event", 0), 0u);
  EXPECT_EQ(metrics.find("wall"), std::string::npos);
  const json summary = json::parse(slurp(dir / "summary.json"));
  EXPECT_TRUE(summary.contains("lp_J_star"));
}

TEST(ExecuteRun, MetricsAreByteIdenticalAcrossRepeats) {
  const RunConfig c = config_from_json(small_run());
  const fs::path a = scratch("det-a");
  const fs::path b = scratch("det-b");
  execute_run(c, a);
  execute_run(c, b);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "budgets.csv"), slurp(b / "budgets.csv"));
}

TEST(Evaluate, SampledReturnAgreesWithExactValue) {
  const RunConfig c = config_from_json(small_run());
  const CmdpSpec spec = build_environment(c);
  const PolicyParams p = PolicyParams::tabular(spec.num_states, spec.num_actions);
  const Evaluation e = evaluate_policy(spec, p, 400, 1);
  EXPECT_EQ(e.rollouts, 400);
  EXPECT_TRUE(e.reward_consistent());
  EXPECT_LT(std::abs(e.sampled_j_cost[0] - e.exact_j_cost[0]), 4.0 * e.cost_standard_error[0] + 1e-9);
}

TEST(Reports, FrontAndChartsAreWellFormed) {
  const RunConfig c = config_from_json(small_run());
  const std::string csv = front_csv(build_environment(c), 0.1, 1.0, 4);
  EXPECT_EQ(count_lines(csv), 5);
  const std::string svg = svg_line_chart("t", "x", {{"a", {0.0, 1.0, 2.0}, {1.0, std::nan(""), 3.0}}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
