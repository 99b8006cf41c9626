#include "rsls/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace rsls {

const char* to_string(SolveReport::Status s) {
  switch (s) {
    case SolveReport::Status::optimal: return "optimal";
    case SolveReport::Status::infeasible: return "infeasible";
    case SolveReport::Status::max_iter: return "max_iter";
    case SolveReport::Status::numerical: return "numerical";
  }
  return "unknown";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

Eigen::VectorXd clamp_bounds(const NlpProblem& p, Eigen::VectorXd b) {
  return b.cwiseMax(p.lb).cwiseMin(p.ub);
}

double violation_l1(const Eigen::VectorXd& ceq, const Eigen::VectorXd& cin) {
  return ceq.cwiseAbs().sum() + cin.cwiseMax(0.0).sum();
}

double violation_inf(const Eigen::VectorXd& ceq, const Eigen::VectorXd& cin) {
  double v = ceq.size() ? ceq.lpNorm<Eigen::Infinity>() : 0.0;
  if (cin.size()) v = std::max(v, cin.maxCoeff());
  return std::max(v, 0.0);
}

}  // namespace

std::pair<Eigen::VectorXd, SolveReport> solve(const NlpProblem& p,
                                              const SolverConfig& cfg,
                                              const Eigen::VectorXd& beta0) {
  const auto t_start = std::chrono::steady_clock::now();
  require_dim(beta0.size() == p.n, "solve: initial point length");

  const int n = p.n, me = p.m_eq, mi = p.m_in;
  std::vector<int> elastic_rows;
  for (int i = 0; i < mi; ++i)
    if (!p.elastic.empty() && p.elastic[static_cast<size_t>(i)])
      elastic_rows.push_back(i);
  const int n_el = static_cast<int>(elastic_rows.size());
  std::vector<int> elastic_col(static_cast<size_t>(mi), -1);
  for (int k = 0; k < n_el; ++k) elastic_col[static_cast<size_t>(elastic_rows[k])] = k;

  // Finite bound rows, folded into the QP inequality block.
  std::vector<std::pair<int, int>> bound_rows;  // (variable, +1 upper / -1 lower)
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(p.lb[i])) bound_rows.emplace_back(i, -1);
    if (std::isfinite(p.ub[i])) bound_rows.emplace_back(i, +1);
  }

  const int N = n + 2 * me + n_el;           // d, ep, en, t
  const int MI = mi + static_cast<int>(bound_rows.size()) + 2 * me + n_el;

  Eigen::VectorXd beta = clamp_bounds(p, beta0);
  Eigen::VectorXd ceq = me ? p.eval_eq(beta) : Eigen::VectorXd(0);
  Eigen::VectorXd cin = mi ? p.eval_in(beta) : Eigen::VectorXd(0);
  double f = p.objective(beta);

  double rho = cfg.rho_init, delta = cfg.delta_init;
  double best_viol = violation_inf(ceq, cin);
  int stall = 0;

  QpSolver qps(cfg.qp);
  std::vector<Triplet> jeq_t, jin_t, trip;
  SpMat Jeq(me, n), Jin(mi, n);

  SolveReport rep;
  rep.status = SolveReport::Status::max_iter;

  QpProblem qp;
  qp.P.resize(N, N);
  {
    trip.clear();
    for (int c = 0; c < n; ++c)
      for (SpMat::InnerIterator it(p.H0, c); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), c, it.value());
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 0.0);  // delta slot
    qp.P.setFromTriplets(trip.begin(), trip.end());
  }

  int iter = 0;
  for (; iter < cfg.max_iter; ++iter) {
    if (me) {
      jeq_t.clear();
      p.jac_eq(beta, jeq_t);
      Jeq.setFromTriplets(jeq_t.begin(), jeq_t.end());
    }
    if (mi) {
      jin_t.clear();
      p.jac_in(beta, jin_t);
      Jin.setFromTriplets(jin_t.begin(), jin_t.end());
    }
    const Eigen::VectorXd g = p.H0 * beta + p.g0;

    // Quadratic block with the current Levenberg shift.
    auto set_delta = [&](double dv) {
      for (int i = 0; i < n; ++i) qp.P.coeffRef(i, i) = p.H0.coeff(i, i) + dv;
    };

    // Equalities: Jeq d - ep + en = -ceq.
    qp.A.resize(me, N);
    trip.clear();
    for (const auto& t : jeq_t) trip.emplace_back(t.row(), t.col(), t.value());
    for (int r = 0; r < me; ++r) {
      trip.emplace_back(r, n + r, -1.0);
      trip.emplace_back(r, n + me + r, 1.0);
    }
    qp.A.setFromTriplets(trip.begin(), trip.end());
    qp.b = -ceq;

    // Inequalities, bounds, elastic nonnegativity.
    qp.G.resize(MI, N);
    trip.clear();
    for (const auto& t : jin_t) trip.emplace_back(t.row(), t.col(), t.value());
    for (int i = 0; i < mi; ++i)
      if (elastic_col[static_cast<size_t>(i)] >= 0)
        trip.emplace_back(i, n + 2 * me + elastic_col[static_cast<size_t>(i)], -1.0);
    qp.h.resize(MI);
    qp.h.head(mi) = -cin;
    int row = mi;
    for (const auto& [var, dir] : bound_rows) {
      trip.emplace_back(row, var, static_cast<double>(dir));
      qp.h[row] = dir > 0 ? p.ub[var] - beta[var] : beta[var] - p.lb[var];
      ++row;
    }
    for (int r = 0; r < 2 * me + n_el; ++r) {
      trip.emplace_back(row, n + r, -1.0);
      qp.h[row] = 0.0;
      ++row;
    }
    qp.G.setFromTriplets(trip.begin(), trip.end());

    // Solve the subproblem, raising the penalty until it dominates the
    // multipliers (keeps the l1 merit exact).
    QpResult qr;
    bool qp_ok = false;
    for (int attempt = 0; attempt < 8 && !qp_ok; ++attempt) {
      set_delta(delta);
      qp.q.resize(N);
      qp.q << g, Eigen::VectorXd::Constant(2 * me + n_el, rho);
      for (int round = 0; round < 3; ++round) {
        qr = qps.solve(qp);
        if (qr.status == QpResult::Status::numerical) break;
        double maxmult = 0.0;
        if (me) maxmult = qr.y.lpNorm<Eigen::Infinity>();
        if (mi) maxmult = std::max(maxmult, qr.z.head(mi).lpNorm<Eigen::Infinity>());
        if (rho >= 1.1 * maxmult || rho >= cfg.rho_max) {
          qp_ok = true;
          break;
        }
        rho = std::min(std::max(1.5 * maxmult, rho * cfg.rho_growth), cfg.rho_max);
        qp.q.tail(2 * me + n_el).setConstant(rho);
      }
      if (!qp_ok && qr.status == QpResult::Status::numerical)
        delta = std::min(delta * 100.0, cfg.delta_max);
    }
    if (!qp_ok) {
      rep.status = SolveReport::Status::numerical;
      break;
    }

    const Eigen::VectorXd d = qr.x.head(n);

    // Exact l1 merit and its decrease predicted by the subproblem model.
    const double viol0 = violation_l1(ceq, cin);
    const double phi0 = f + rho * viol0;
    double viol_lin = 0.0;
    if (me) viol_lin += (ceq + Jeq * d).cwiseAbs().sum();
    if (mi) viol_lin += (cin + Jin * d).cwiseMax(0.0).sum();
    const double pred = -(g.dot(d) + 0.5 * d.dot(p.H0 * d)) +
                        rho * (viol0 - viol_lin);

    // At an exact subproblem optimum pred >= 0.5 * delta * ||d||^2, so a
    // non-positive prediction at a feasible point is pure subproblem noise:
    // the model certifies stationarity and no step can be accepted.
    if (pred <= 0.0 && violation_inf(ceq, cin) <= cfg.tol_feas) {
      rep.status = SolveReport::Status::optimal;
      rep.kkt_residual = 0.0;
      rep.violation = violation_inf(ceq, cin);
      ++iter;
      break;
    }

    // Armijo backtracking on the merit.
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd beta_t, ceq_t, cin_t;
    double f_t = 0.0;
    for (int ls = 0; ls < 24 && pred > 0; ++ls) {
      beta_t = clamp_bounds(p, beta + alpha * d);
      try {
        ceq_t = me ? p.eval_eq(beta_t) : Eigen::VectorXd(0);
        cin_t = mi ? p.eval_in(beta_t) : Eigen::VectorXd(0);
      } catch (const NumericalError&) {
        alpha *= 0.5;  // trial point left the evaluable region
        continue;
      }
      f_t = p.objective(beta_t);
      const double phi_t = f_t + rho * violation_l1(ceq_t, cin_t);
      if (phi_t <= phi0 - 0.01 * alpha * pred) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    const double step_norm = accepted ? alpha * d.lpNorm<Eigen::Infinity>() : 0.0;
    if (accepted) {
      beta = beta_t;
      ceq = ceq_t;
      cin = cin_t;
      f = f_t;
      delta = std::max(delta * 0.4, cfg.delta_min);
    } else {
      delta = std::min(delta * 10.0, cfg.delta_max);
    }

    const double viol = violation_inf(ceq, cin);
    // Stationarity residual of the original problem implied by the
    // subproblem optimality conditions: (H0 + delta I) d.
    const double kkt = ((p.H0 * d).array().abs() + delta * d.array().abs())
                           .maxCoeff() /
                       (1.0 + g.lpNorm<Eigen::Infinity>());
    rep.kkt_residual = kkt;
    rep.violation = viol;

    if (cfg.verbose)
      std::printf("it %3d f %.8e viol %.3e pred %.3e alpha %.2e rho %.1e delta %.1e\n",
                  iter, f, viol, pred, accepted ? alpha : 0.0, rho, delta);

    if (viol <= cfg.tol_feas &&
        (kkt <= cfg.tol_kkt || (accepted && step_norm <= 1e-11 * (1.0 + beta.lpNorm<Eigen::Infinity>())))) {
      rep.status = SolveReport::Status::optimal;
      ++iter;
      break;
    }

    // Infeasibility: penalty saturated and the violation has stopped moving.
    if (viol > cfg.tol_feas && rho >= 0.999 * cfg.rho_max) {
      if (viol > best_viol * (1.0 - 1e-3))
        ++stall;
      else
        stall = 0;
      if (stall >= cfg.stall_limit) {
        rep.status = SolveReport::Status::infeasible;
        ++iter;
        break;
      }
    }
    best_viol = std::min(best_viol, viol);

    if (!accepted && delta >= cfg.delta_max) {
      // Trust region exhausted. With the penalty saturated and the iterate
      // still violating, the l1-feasibility model is locally stationary at a
      // nonzero violation: report infeasibility rather than breakdown.
      rep.status = (viol > cfg.tol_feas && rho >= 0.999 * cfg.rho_max)
                       ? SolveReport::Status::infeasible
                       : SolveReport::Status::numerical;
      break;
    }
  }

  rep.objective = f;
  rep.iterations = iter;
  rep.violation = violation_inf(ceq, cin);
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  if (rep.status == SolveReport::Status::optimal &&
      rep.violation > cfg.tol_feas)
    rep.status = SolveReport::Status::numerical;
  return {beta, rep};
}

}  // namespace rsls
