#include "acpo/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace acpo {

namespace {

// Revised simplex on min cost.x, A x = b, x >= 0 with b >= 0. The basis is
// refactorized from the original columns every iteration, so round-off does
// not accumulate across pivots.
class RevisedSimplex {
 public:
  RevisedSimplex(const Matrix& a, const Vector& b, double tol) : a_(a), b_(b), tol_(tol) {}

  std::vector<int>& basis() { return basis_; }

  /// Solves for the basic values with the current basis.
  Vector basic_values() {
    factor();
    return lu_.solve(b_);
  }

  /// Minimizes cost over entering columns [0, ncols). False when unbounded.
  bool optimize(const Vector& cost, int ncols) {
    const int m = static_cast<int>(a_.rows());
    std::vector<char> in_basis(a_.cols(), 0);
    for (long guard = 0; guard < 200000; ++guard) {
      std::fill(in_basis.begin(), in_basis.end(), 0);
      for (int bi : basis_) in_basis[bi] = 1;
      factor();
      const Vector xb = lu_.solve(b_);
      Vector cb(m);
      for (int i = 0; i < m; ++i) cb[i] = cost[basis_[i]];
      const Vector y = lu_.transpose().solve(cb);
      int enter = -1;
      for (int j = 0; j < ncols; ++j) {
        if (in_basis[j]) continue;
        const double reduced = cost[j] - y.dot(a_.col(j));
        if (reduced < -tol_ * (1.0 + std::abs(cost[j]))) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      const Vector u = lu_.solve(a_.col(enter));
      // Two-pass ratio test: bound the step with a small feasibility
      // allowance, then take the largest pivot among rows within that bound.
      const double piv_tol = 1e-9 * std::max(1.0, u.cwiseAbs().maxCoeff());
      double bound = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (u[i] > piv_tol) bound = std::min(bound, (std::max(0.0, xb[i]) + 1e-9) / u[i]);
      }
      int leave = -1;
      for (int i = 0; i < m; ++i) {
        if (u[i] <= piv_tol || std::max(0.0, xb[i]) / u[i] > bound) continue;
        if (leave < 0 || u[i] > u[leave]) leave = i;
      }
      if (leave < 0) return false;
      basis_[leave] = enter;
    }
    throw NumericError("simplex iteration limit reached");
  }

  /// Row i of B^{-1} A restricted to column j.
  double tableau_entry(int i, int j) {
    factor();
    return lu_.solve(a_.col(j))[i];
  }

 private:
  void factor() {
    const int m = static_cast<int>(a_.rows());
    Matrix bm(m, m);
    for (int i = 0; i < m; ++i) bm.col(i) = a_.col(basis_[i]);
    lu_.compute(bm);
  }

  const Matrix& a_;
  const Vector& b_;
  double tol_;
  std::vector<int> basis_;
  Eigen::PartialPivLU<Matrix> lu_;
};

}  // namespace

SimplexResult simplex_solve(const LinearProgram& lp, double tol) {
  const int n = static_cast<int>(lp.c.size());
  const int me = static_cast<int>(lp.a_eq.rows());
  const int mu = static_cast<int>(lp.a_ub.rows());
  if ((me > 0 && lp.a_eq.cols() != n) || (mu > 0 && lp.a_ub.cols() != n) ||
      lp.b_eq.size() != me || lp.b_ub.size() != mu) {
    throw std::invalid_argument("linear program has inconsistent shapes");
  }
  SimplexResult out;
  const int m = me + mu;
  if (m == 0) {
    if ((lp.c.array() > 0.0).any()) {
      out.status = LpStatus::Unbounded;
      return out;
    }
    out.status = LpStatus::Optimal;
    out.x = Vector::Zero(n);
    return out;
  }
  // Columns: x (n), slacks (mu), artificials (m).
  const int art0 = n + mu;
  Matrix a = Matrix::Zero(m, art0 + m);
  Vector b(m);
  for (int i = 0; i < me; ++i) {
    a.row(i).head(n) = lp.a_eq.row(i);
    b[i] = lp.b_eq[i];
  }
  for (int i = 0; i < mu; ++i) {
    a.row(me + i).head(n) = lp.a_ub.row(i);
    a(me + i, n + i) = 1.0;
    b[me + i] = lp.b_ub[i];
  }
  // Rows start on their slack when it is feasible, else on an artificial.
  std::vector<int> start(m);
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0.0) {
      a.row(i) *= -1.0;
      b[i] = -b[i];
    }
    a(i, art0 + i) = 1.0;
    start[i] = (i >= me && a(i, n + i - me) > 0.0) ? n + i - me : art0 + i;
  }

  RevisedSimplex solver(a, b, tol);
  solver.basis() = start;

  Vector phase1 = Vector::Zero(art0 + m);
  phase1.tail(m).setOnes();
  solver.optimize(phase1, art0 + m);
  const double scale = std::max(1.0, b.cwiseAbs().sum());
  {
    const Vector xb = solver.basic_values();
    double infeas = 0.0;
    for (int i = 0; i < m; ++i) {
      if (solver.basis()[i] >= art0) infeas += std::abs(xb[i]);
    }
    if (infeas > 1e-9 * scale) {
      out.status = LpStatus::Infeasible;
      return out;
    }
  }
  // Pivot zero-valued artificials out where some original column can replace
  // them; the ones that remain sit on redundant rows and stay at zero.
  for (int i = 0; i < m; ++i) {
    if (solver.basis()[i] < art0) continue;
    for (int j = 0; j < art0; ++j) {
      if (std::find(solver.basis().begin(), solver.basis().end(), j) != solver.basis().end()) {
        continue;
      }
      if (std::abs(solver.tableau_entry(i, j)) > 1e-7) {
        solver.basis()[i] = j;
        break;
      }
    }
  }

  Vector phase2 = Vector::Zero(art0 + m);
  phase2.head(n) = -lp.c;
  if (!solver.optimize(phase2, art0)) {
    out.status = LpStatus::Unbounded;
    return out;
  }
  const Vector xb = solver.basic_values();
  out.x = Vector::Zero(n);
  for (int i = 0; i < m; ++i) {
    const int col = solver.basis()[i];
    if (col < n) out.x[col] = std::max(0.0, xb[i]);
  }
  // The returned point must satisfy the original constraints.
  double residual = 0.0;
  if (me > 0) residual = (lp.a_eq * out.x - lp.b_eq).cwiseAbs().maxCoeff();
  if (mu > 0) residual = std::max(residual, (lp.a_ub * out.x - lp.b_ub).maxCoeff());
  if (residual > 1e-7 * scale) {
    throw NumericError("simplex solution violates its constraints by " + std::to_string(residual));
  }
  out.status = LpStatus::Optimal;
  out.objective = lp.c.dot(out.x);
  return out;
}

}  // namespace acpo
