#include "acpo/gridworld.hpp"

#include <algorithm>
#include <array>

namespace acpo {

namespace {

constexpr int kActions = 4;
constexpr std::array<int, kActions> kRowDelta{-1, 0, 1, 0};
constexpr std::array<int, kActions> kColDelta{0, 1, 0, -1};

struct Layout {
  int size = 0;
  double step_penalty = 1.0;
  int start = 0;
  std::vector<double> goal_reward;       // per cell, 0 = not a goal
  std::vector<std::vector<double>> cost; // per field, per cell
};

int move(int size, int cell, int action) {
  const int r = cell / size;
  const int c = cell % size;
  const int nr = r + kRowDelta[action];
  const int nc = c + kColDelta[action];
  if (nr < 0 || nr >= size || nc < 0 || nc >= size) return cell;
  return nr * size + nc;
}

// Seed 0 keeps unit hazard intensities; any other seed draws each hazard
// cell's intensity from [0.5, 1.5].
void jitter_hazards(Layout& layout, std::uint64_t seed) {
  if (seed == 0) return;
  Rng rng = make_rng(seed, "gridworld");
  for (auto& field : layout.cost) {
    for (double& v : field) {
      if (v > 0.0) v *= 0.5 + uniform01(rng);
    }
  }
}

Layout hazard_goal(int n) {
  Layout l;
  l.size = n;
  const int mid = n / 2;
  l.start = gridworld_cell(n, 0, mid);
  l.goal_reward.assign(n * n, 0.0);
  l.goal_reward[gridworld_cell(n, n - 1, mid)] = 10.0;
  l.cost.assign(1, std::vector<double>(n * n, 0.0));
  for (int r = 1; r < n - 1; ++r)
    for (int c = 1; c < n - 1; ++c) l.cost[0][gridworld_cell(n, r, c)] = 1.0;
  return l;
}

Layout trap(int n) {
  Layout l;
  l.size = n;
  const int mid = n / 2;
  l.start = gridworld_cell(n, mid, 0);
  l.goal_reward.assign(n * n, 0.0);
  l.step_penalty = 0.0;
  l.goal_reward[gridworld_cell(n, 0, 0)] = 1.0;
  l.goal_reward[gridworld_cell(n, mid, n - 1)] = 10.0;
  l.cost.assign(1, std::vector<double>(n * n, 0.0));
  for (int r = 0; r < n; ++r) l.cost[0][gridworld_cell(n, r, mid)] = 1.0;
  return l;
}

Layout two_cost(int n) {
  Layout l;
  l.size = n;
  const int mid = n / 2;
  l.start = gridworld_cell(n, n - 1, mid);
  l.goal_reward.assign(n * n, 0.0);
  l.goal_reward[gridworld_cell(n, 0, mid)] = 10.0;
  l.cost.assign(2, std::vector<double>(n * n, 0.0));
  for (int r = 1; r < n - 1; ++r) {
    for (int c = 1; c < n - 1; ++c) {
      const int cell = gridworld_cell(n, r, c);
      if (c <= mid) l.cost[0][cell] = 1.0;
      if (c >= mid) l.cost[1][cell] = 1.0;
    }
  }
  return l;
}

CmdpSpec assemble(const Layout& l, const GridworldParams& p) {
  const int n = l.size;
  const int cells = n * n;
  const int terminal = gridworld_terminal(n);
  CmdpSpec spec = make_empty_spec(cells + 1, kActions, static_cast<int>(l.cost.size()),
                                  p.discount, p.horizon);
  for (int s = 0; s < cells; ++s) {
    const bool is_goal = l.goal_reward[s] > 0.0;
    for (int a = 0; a < kActions; ++a) {
      if (is_goal) {
        // Unreachable: entering a goal cell redirects into the terminal.
        spec.p(s, a, terminal) = 1.0;
        continue;
      }
      double goal_mass_reward = 0.0;
      for (int taken = 0; taken < kActions; ++taken) {
        const double prob = (taken == a ? 1.0 - p.slip : 0.0) + p.slip / kActions;
        if (prob == 0.0) continue;
        const int next = move(n, s, taken);
        if (l.goal_reward[next] > 0.0) {
          spec.p(s, a, terminal) += prob;
          goal_mass_reward += prob * l.goal_reward[next];
        } else {
          spec.p(s, a, next) += prob;
        }
      }
      spec.reward(s, a) = goal_mass_reward - p.step_penalty.value_or(l.step_penalty);
      for (std::size_t i = 0; i < l.cost.size(); ++i) spec.costs[i](s, a) = l.cost[i][s];
    }
  }
  for (int a = 0; a < kActions; ++a) spec.p(terminal, a, terminal) = 1.0;
  spec.initial_dist[l.start] = 1.0;
  spec.validate();
  return spec;
}

}  // namespace

CmdpSpec build_gridworld(const std::string& kind, int size, std::uint64_t seed) {
  GridworldParams p;
  p.kind = kind;
  p.size = size;
  p.seed = seed;
  return build_gridworld(p);
}

CmdpSpec build_gridworld(const GridworldParams& params) {
  if (params.size < 3) throw std::invalid_argument("gridworld size must be at least 3");
  if (!(params.slip >= 0.0 && params.slip <= 1.0)) {
    throw std::invalid_argument("gridworld slip must lie in [0, 1]");
  }
  Layout layout;
  if (params.kind == "hazard-goal") {
    layout = hazard_goal(params.size);
  } else if (params.kind == "trap") {
    layout = trap(params.size);
  } else if (params.kind == "two-cost") {
    layout = two_cost(params.size);
  } else {
    throw std::invalid_argument("unknown gridworld kind: " + params.kind);
  }
  jitter_hazards(layout, params.seed);
  return assemble(layout, params);
}

}  // namespace acpo
