#pragma once

#include "acpo/common.hpp"

namespace acpo {

enum class LpStatus { Optimal, Infeasible, Unbounded };

/// maximize c.x subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0.
struct LinearProgram {
  Vector c;
  Matrix a_eq;
  Vector b_eq;
  Matrix a_ub;
  Vector b_ub;
};

struct SimplexResult {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = 0.0;
};

/// Two-phase revised simplex. Entering columns follow Bland's order; leaving
/// rows use a two-pass ratio test favouring large pivots.
SimplexResult simplex_solve(const LinearProgram& lp, double tol = 1e-9);

}  // namespace acpo
