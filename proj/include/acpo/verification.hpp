#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acpo/oracle.hpp"
#include "acpo/training.hpp"

#include "json.hpp"

namespace acpo {

/// Outcome of one verification suite.
struct SuiteResult {
  std::string suite;
  std::vector<BoundReport> reports;
  double seconds = 0.0;

  int passed() const;
  int failed() const;
  int skipped() const;
  /// True iff nothing failed and at least one report was checked.
  bool ok() const;
};

nlohmann::json to_json(const SuiteResult& r);
/// Fixed-width text table: one line per report plus a totals line.
std::string summary_table(const SuiteResult& r, bool failures_only = false);

/// Random CMDP with dense transitions, rewards in [-1, 1], costs in [0, 1] and
/// a discount drawn from [0.8, 0.99].
CmdpSpec random_cmdp(Rng& rng, int num_states, int num_actions, int num_costs);

/// Performance-difference bounds on random policy pairs over random specs
/// with at most 8 states and 4 actions.
SuiteResult run_lemma_suite(std::uint64_t seed, int num_specs = 20, int pairs_per_spec = 25);

struct GapSuiteConfig {
  int instances = 20;
  /// Doubling pairs inside this list are also checked for inverse scaling.
  std::vector<double> t_values{10.0, 20.0, 25.0, 50.0};
  int grid_resolution = 1000;
};

/// Random two-state, two-action instance whose per-step constraint binds:
/// the unconstrained per-step optimum is infeasible and a strictly feasible
/// point exists.
GapInstance random_binding_gap_instance(Rng& rng);

/// Barrier optimality gap on random binding instances, plus the envelope
/// scaling check across doublings of t.
SuiteResult run_gap_suite(std::uint64_t seed, const GapSuiteConfig& cfg = {});

/// Analytic stage-objective gradients against central differences with step
/// `h` on random (policy, batch, stage) triples. Each report compares the
/// largest entrywise error, relative to the largest difference quotient,
/// with 1e-4. Draws whose stencil crosses a clip edge or a barrier switch
/// point are replaced; the report context counts the replacements.
SuiteResult run_gradient_suite(std::uint64_t seed, int triples = 100, double h = 1e-5);

/// Trains ACPO with `cfg`, keeping every policy, and checks every stage-pair
/// budget bound. The run is returned through `run_out` when given.
SuiteResult run_bounds_suite(const CmdpSpec& spec, const TrainConfig& cfg, std::uint64_t seed,
                             const BudgetBoundConfig& bounds, RunResult* run_out = nullptr);

/// Stage-pair bounds of an existing run.
SuiteResult check_run_bounds(const CmdpSpec& spec, const RunResult& run,
                             const BudgetBoundConfig& bounds);

}  // namespace acpo
