#include "acpo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace acpo {

LpSolution lp_solve(const CmdpSpec& spec, const Vector& d) {
  spec.validate();
  const int S = spec.num_states;
  const int A = spec.num_actions;
  const int m = spec.num_costs();
  if (d.size() != m) throw std::invalid_argument("budget vector length does not match costs");
  const double g = spec.discount;
  auto var = [A](int s, int a) { return s * A + a; };

  // Variables are unnormalized occupancies x = mu / (1 - gamma), which keeps
  // the right-hand sides at the scale of rho0 and d.
  LinearProgram lp;
  lp.c = Vector::Zero(S * A);
  lp.a_eq = Matrix::Zero(S, S * A);
  lp.b_eq = spec.initial_dist;
  lp.a_ub = Matrix::Zero(m, S * A);
  lp.b_ub = d;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int v = var(s, a);
      lp.c[v] = spec.reward(s, a);
      lp.a_eq(s, v) += 1.0;
      const double* row = spec.row(s, a);
      for (int n = 0; n < S; ++n) lp.a_eq(n, v) -= g * row[n];
      for (int i = 0; i < m; ++i) lp.a_ub(i, v) = spec.costs[i](s, a);
    }
  }
  const SimplexResult res = simplex_solve(lp, 1e-9);
  LpSolution out;
  out.status = res.status;
  if (res.status != LpStatus::Optimal) return out;

  out.occupancy = Matrix::Zero(S, A);
  out.policy = Matrix::Constant(S, A, 1.0 / A);
  for (int s = 0; s < S; ++s) {
    double total = 0.0;
    for (int a = 0; a < A; ++a) {
      out.occupancy(s, a) = (1.0 - g) * res.x[var(s, a)];
      total += res.x[var(s, a)];
    }
    if (total > 1e-14) out.policy.row(s) = res.x.segment(var(s, 0), A).transpose() / total;
  }
  out.j_star = res.objective;
  out.j_cost = Vector::Zero(m);
  for (int i = 0; i < m; ++i) {
    out.j_cost[i] = (out.occupancy.array() * spec.costs[i].array()).sum() / (1.0 - g);
  }
  return out;
}

std::vector<FrontPoint> pareto_front(const CmdpSpec& spec, const std::vector<Vector>& budgets) {
  for (std::size_t k = 1; k < budgets.size(); ++k) {
    if ((budgets[k].array() < budgets[k - 1].array()).any()) {
      throw std::invalid_argument("budget grid must be sorted ascending");
    }
  }
  std::vector<FrontPoint> out;
  out.reserve(budgets.size());
  for (const Vector& d : budgets) {
    const LpSolution sol = lp_solve(spec, d);
    FrontPoint p;
    p.budget = d;
    p.feasible = sol.feasible();
    if (p.feasible) {
      p.j_star = sol.j_star;
      p.j_cost = sol.j_cost;
    }
    out.push_back(std::move(p));
  }
  return out;
}

Epsilons epsilons(const CmdpSpec& spec, const Matrix& prev_probs, const Matrix& next_probs) {
  const ExactEval ev = exact_eval(spec, prev_probs);
  auto eps_of = [&](const Matrix& adv) {
    double worst = 0.0;
    for (int s = 0; s < spec.num_states; ++s) {
      worst = std::max(worst, std::abs(next_probs.row(s).dot(adv.row(s))));
    }
    return worst;
  };
  if (prev_probs == next_probs) return {0.0, Vector::Zero(spec.num_costs())};
  Epsilons out;
  out.reward = eps_of(ev.advantage_reward());
  out.cost = Vector::Zero(spec.num_costs());
  for (int i = 0; i < spec.num_costs(); ++i) out.cost[i] = eps_of(ev.advantage_cost(i));
  return out;
}

Epsilons epsilons(const CmdpSpec& spec, const PolicyParams& pi_prev, const PolicyParams& pi_next) {
  if (pi_prev.num_states() != spec.num_states || pi_next.num_states() != spec.num_states) {
    throw std::invalid_argument("policies are not bound to this spec");
  }
  return epsilons(spec, pi_prev.prob_table(), pi_next.prob_table());
}

void BoundReport::settle() {
  slack = rhs - lhs;
  pass = skipped || slack >= -1e-8 * (1.0 + std::abs(rhs));
}

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["context"] = r.context;
  j["eps_R"] = r.eps_reward;
  j["eps_C"] = std::vector<double>(r.eps_cost.data(), r.eps_cost.data() + r.eps_cost.size());
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack;
  j["verdict"] = r.skipped ? "skipped" : (r.pass ? "pass" : "fail");
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

std::vector<BoundReport> check_performance_bound(const CmdpSpec& spec, const Matrix& old_probs,
                                                 const Matrix& new_probs) {
  const ExactEval ev_old = exact_eval(spec, old_probs);
  const ExactEval ev_new = exact_eval(spec, new_probs);
  const double g = spec.discount;
  const Vector& d = ev_old.visitation;
  const double kl = kl_divergence(new_probs, old_probs, d);
  std::vector<BoundReport> out;

  auto check = [&](const std::string& signal, const Matrix& adv, double gap) {
    double surrogate = 0.0;
    double eps = 0.0;
    for (int s = 0; s < spec.num_states; ++s) {
      const double e = new_probs.row(s).dot(adv.row(s));
      surrogate += d[s] * e;
      eps = std::max(eps, std::abs(e));
    }
    surrogate /= (1.0 - g);
    const double penalty = std::sqrt(2.0) * g * eps / ((1.0 - g) * (1.0 - g)) * std::sqrt(kl);

    BoundReport lower;
    lower.name = "performance-lower-" + signal;
    lower.eps_reward = eps;
    lower.lhs = surrogate - penalty;
    lower.rhs = gap;
    lower.settle();
    BoundReport upper = lower;
    upper.name = "performance-upper-" + signal;
    upper.lhs = gap;
    upper.rhs = surrogate + penalty;
    upper.settle();
    out.push_back(lower);
    out.push_back(upper);
  };
  check("reward", ev_old.advantage_reward(), ev_new.j_reward - ev_old.j_reward);
  for (int i = 0; i < spec.num_costs(); ++i) {
    check("cost" + std::to_string(i), ev_old.advantage_cost(i), ev_new.j_cost[i] - ev_old.j_cost[i]);
  }
  return out;
}

std::vector<BoundReport> check_performance_bound(const CmdpSpec& spec,
                                                 const PolicyParams& pi_old,
                                                 const PolicyParams& pi_new) {
  return check_performance_bound(spec, pi_old.prob_table(), pi_new.prob_table());
}

namespace {

struct Segment {
  StageKind kind;
  int first;  // record indices, inclusive
  int last;
  int updates = 0;
};

}  // namespace

std::vector<BoundReport> check_theorem_budget_bounds(const CmdpSpec& spec, const RunResult& run,
                                                     const BudgetBoundConfig& cfg) {
  std::vector<BoundReport> out;
  const int n = static_cast<int>(run.records.size());
  if (static_cast<int>(run.policies.size()) != n + 1) {
    BoundReport r;
    r.name = "stage-bounds";
    r.skipped = true;
    r.reason = "run has no per-iteration policy checkpoints";
    r.settle();
    out.push_back(r);
    return out;
  }
  const double g = spec.discount;
  const double coef = g / ((1.0 - g) * (1.0 - g));
  const double interior = 1.0 / ((1.0 - g) * cfg.barrier_t);
  const int m = spec.num_costs();

  std::vector<Matrix> probs;
  probs.reserve(run.policies.size());
  for (const auto& p : run.policies) probs.push_back(p.prob_table());

  // Running maxima of exact epsilons and KL, indexed by record.
  std::vector<double> eps_r(n, 0.0), kl_max(n, 0.0);
  std::vector<Vector> eps_c(n, Vector::Zero(m));
  double run_eps_r = 0.0;
  double run_kl = 0.0;
  Vector run_eps_c = Vector::Zero(m);
  for (int k = 0; k < n; ++k) {
    if (run.records[k].updated) {
      const Epsilons e = epsilons(spec, probs[k], probs[k + 1]);
      run_eps_r = std::max(run_eps_r, e.reward);
      run_eps_c = run_eps_c.cwiseMax(e.cost);
      const ExactEval ev = exact_eval(spec, probs[k]);
      run_kl = std::max(run_kl, kl_divergence(probs[k + 1], probs[k], ev.visitation));
    }
    eps_r[k] = run_eps_r;
    eps_c[k] = run_eps_c;
    kl_max[k] = run_kl;
  }

  std::vector<Segment> segs;
  for (int k = 0; k < n; ++k) {
    const auto& rec = run.records[k];
    if (segs.empty() || rec.segment != run.records[segs.back().first].segment) {
      segs.push_back(Segment{rec.flag, k, k, 0});
    }
    segs.back().last = k;
    if (rec.updated) ++segs.back().updates;
  }
  std::vector<double> end_reward(segs.size());
  std::vector<Vector> end_cost(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const ExactEval ev = exact_eval(spec, probs[segs[i].last + 1]);
    end_reward[i] = ev.j_reward;
    end_cost[i] = ev.j_cost;
  }

  auto emit = [&](const std::string& name, std::size_t a, std::size_t b, double delta,
                  bool reward, int constraint) {
    int same = 0;
    int other = 0;
    bool crosses_projection = false;
    for (std::size_t i = a + 1; i <= b; ++i) {
      if (segs[i].kind == StageKind::Projection) crosses_projection = true;
      (i == b ? same : other) += segs[i].updates;
    }
    BoundReport r;
    r.name = name;
    r.context = "k=" + std::to_string(b) + " stage=" + to_string(segs[b].kind) +
                " iter=" + std::to_string(segs[b].last);
    r.eps_reward = eps_r[segs[b].last];
    r.eps_cost = eps_c[segs[b].last];
    if (crosses_projection) {
      r.skipped = true;
      r.reason = "span contains a projection stage";
      r.settle();
      out.push_back(r);
      return;
    }
    const double total = same + other;
    if (reward) {
      // g^k - g^{k-1} >= -n1 interior - coef sqrt(2 delta) (n1+n2) eps_R
      r.lhs = -same * interior - coef * std::sqrt(2.0 * delta) * total * r.eps_reward;
      r.rhs = end_reward[b] - end_reward[a];
    } else {
      // d^{k+1} - d^k <= n2 interior + coef sqrt(2 delta) (n1+n2) eps_C
      r.lhs = end_cost[b][constraint] - end_cost[a][constraint];
      r.rhs = same * interior + coef * std::sqrt(2.0 * delta) * total * r.eps_cost[constraint];
    }
    r.settle();
    out.push_back(r);
  };

  auto pairs_of = [&](StageKind kind) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (segs[i].kind != kind || segs[i].updates == 0) continue;
      if (prev) pairs.emplace_back(*prev, i);
      prev = i;
    }
    return pairs;
  };

  for (const auto& [a, b] : pairs_of(StageKind::MaxReward)) {
    emit("reward-budget-update", a, b, kl_max[segs[b].last], true, 0);
    if (cfg.configured_delta > 0.0) {
      emit("reward-budget-update-configured-delta", a, b, cfg.configured_delta, true, 0);
    }
  }
  for (const auto& [a, b] : pairs_of(StageKind::MinCost)) {
    for (int i = 0; i < m; ++i) {
      const std::string suffix = m > 1 ? "-cost" + std::to_string(i) : "";
      emit("cost-budget-update" + suffix, a, b, kl_max[segs[b].last], false, i);
      if (cfg.configured_delta > 0.0) {
        emit("cost-budget-update-configured-delta" + suffix, a, b, cfg.configured_delta, false,
             i);
      }
    }
  }
  return out;
}

GapAffine gap_affine_terms(const GapInstance& inst) {
  const CmdpSpec& spec = inst.spec;
  if (spec.num_actions != 2 || spec.num_states > 2) {
    throw std::invalid_argument("gap check supports at most 2 states with 2 actions");
  }
  if (spec.num_costs() != 1) throw std::invalid_argument("gap check needs exactly one cost");
  const ExactEval ev = exact_eval(spec, inst.reference_probs);
  const Matrix adv_r = ev.advantage_reward();
  const Matrix adv_c = ev.advantage_cost(0);
  const Vector& d = ev.visitation;
  const double g = spec.discount;
  const int S = spec.num_states;
  GapAffine out;
  out.h0 = ev.j_cost[0] - inst.budget;
  out.fs.resize(S);
  out.hs.resize(S);
  for (int s = 0; s < S; ++s) {
    out.f0 += d[s] * adv_r(s, 1);
    out.fs[s] = d[s] * (adv_r(s, 0) - adv_r(s, 1));
    out.h0 += d[s] * adv_c(s, 1) / (1.0 - g);
    out.hs[s] = d[s] * (adv_c(s, 0) - adv_c(s, 1)) / (1.0 - g);
  }
  return out;
}

GapReport check_ipo_gap(const GapInstance& inst, double t, int grid_resolution) {
  if (grid_resolution < 2) throw std::invalid_argument("grid_resolution must be >= 2");
  if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
  const GapAffine aff = gap_affine_terms(inst);
  const int S = inst.spec.num_states;
  const double f0 = aff.f0, h0 = aff.h0;
  const Vector& fs = aff.fs;
  const Vector& hs = aff.hs;
  const double lip = fs.cwiseAbs().sum();

  GapReport out;
  out.report.name = "barrier-gap";
  out.report.context = "t=" + std::to_string(t);
  double best_con = -std::numeric_limits<double>::infinity();
  double best_bar = -std::numeric_limits<double>::infinity();
  double bar_f = 0.0;
  double bar_h = 0.0;
  const int steps = grid_resolution;
  std::vector<int> idx(S, 0);
  while (true) {
    double f = f0, h = h0;
    for (int s = 0; s < S; ++s) {
      const double p = static_cast<double>(idx[s]) / steps;
      f += fs[s] * p;
      h += hs[s] * p;
    }
    if (h <= 0.0) best_con = std::max(best_con, f);
    if (h < 0.0) {
      const double b = f + std::log(-h) / t;
      if (b > best_bar) {
        best_bar = b;
        bar_f = f;
        bar_h = h;
      }
    }
    int s = 0;
    while (s < S && ++idx[s] > steps) idx[s++] = 0;
    if (s == S) break;
  }
  // Each grid cell spans 1/steps per axis; moving to the nearest grid point
  // from either optimum changes the objective by at most lip/steps, and both
  // optima can be displaced.
  out.tau_grid = 2.0 * lip / steps;
  if (!std::isfinite(best_bar)) {
    out.report.skipped = true;
    out.report.reason = "no strictly feasible grid point";
    out.report.settle();
    return out;
  }
  if (bar_h > 0.0) {
    out.report.skipped = true;
    out.report.reason = "barrier optimum violates the constraint";
    out.report.settle();
    return out;
  }
  out.constrained_value = best_con;
  out.barrier_value = bar_f;
  out.gap = best_con - bar_f;
  // Two-sided check folded into one report: lhs is the larger violation.
  const double upper = 1.0 / t + out.tau_grid;
  const double lower = -out.tau_grid;
  out.report.lhs = out.gap;
  out.report.rhs = upper;
  out.report.settle();
  if (out.gap < lower) {
    out.report.lhs = lower;
    out.report.rhs = out.gap;
    out.report.settle();
  }
  return out;
}

}  // namespace acpo
