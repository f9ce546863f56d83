#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acpo/cmdp.hpp"

namespace acpo {

/// Benchmark families. All share one layout convention: an n x n grid with
/// four moves (up, right, down, left), walls that hold the agent in place,
/// and one extra absorbing state that every goal transition leads into.
///
///  * "hazard-goal": start top-middle, goal bottom-middle, the interior block
///    is a hazard field. Crossing it is short and costly; the border detour is
///    long and free.
///  * "trap": start on the left edge, a cheap nearby goal with a small reward
///    and a far goal with a large reward behind a full-height hazard column.
///    Under a tight fixed budget the learner settles on the near goal.
///  * "two-cost": start bottom-middle, goal top-middle; interior cells left
///    of and on the centre column carry cost 0, those right of and on it carry
///    cost 1, and the border ring is a free detour.
struct GridworldParams {
  std::string kind = "hazard-goal";
  int size = 5;
  std::uint64_t seed = 0;
  double slip = 0.05;          ///< probability the move is replaced by a uniform one
  /// Reward subtracted on every step; unset selects the family default
  /// (1 for hazard-goal and two-cost, 0 for trap).
  std::optional<double> step_penalty;
  double discount = 0.99;
  int horizon = 200;
};

inline const std::vector<std::string>& gridworld_kinds() {
  static const std::vector<std::string> kinds{"hazard-goal", "trap", "two-cost"};
  return kinds;
}

/// Builds a family member with default parameters.
CmdpSpec build_gridworld(const std::string& kind, int size, std::uint64_t seed);
CmdpSpec build_gridworld(const GridworldParams& params);

/// Index of the absorbing terminal state of a gridworld of side `size`.
inline int gridworld_terminal(int size) { return size * size; }
inline int gridworld_cell(int size, int row, int col) { return row * size + col; }

}  // namespace acpo
