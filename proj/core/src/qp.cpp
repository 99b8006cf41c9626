#include "rsls/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rsls {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Upper-triangular triplets of the quasi-definite KKT matrix
//   [ P + dI   A'      G'        ]
//   [ A       -dI      0         ]
//   [ G        0      -(W + dI)  ]
void kkt_triplets(const QpProblem& qp, const Eigen::VectorXd& w, double reg,
                  std::vector<Triplet>& t) {
  const int n = qp.n(), me = qp.me(), mi = qp.mi();
  t.clear();
  for (int c = 0; c < n; ++c)
    for (SpMat::InnerIterator it(qp.P, c); it; ++it)
      if (it.row() <= c) t.emplace_back(static_cast<int>(it.row()), c, it.value());
  for (int i = 0; i < n; ++i) t.emplace_back(i, i, reg);
  for (int c = 0; c < qp.A.cols(); ++c)
    for (SpMat::InnerIterator it(qp.A, c); it; ++it)
      t.emplace_back(c, n + static_cast<int>(it.row()), it.value());
  for (int r = 0; r < me; ++r) t.emplace_back(n + r, n + r, -reg);
  for (int c = 0; c < qp.G.cols(); ++c)
    for (SpMat::InnerIterator it(qp.G, c); it; ++it)
      t.emplace_back(c, n + me + static_cast<int>(it.row()), it.value());
  for (int r = 0; r < mi; ++r)
    t.emplace_back(n + me + r, n + me + r, -(w[r] + reg));
}

double step_length(const Eigen::VectorXd& v, const Eigen::VectorXd& dv,
                   double tau) {
  double alpha = 1.0;
  for (int i = 0; i < v.size(); ++i)
    if (dv[i] < 0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
  return alpha;
}

}  // namespace

QpResult QpSolver::solve(const QpProblem& qp) {
  const int n = qp.n(), me = qp.me(), mi = qp.mi();
  require_dim(qp.q.size() == n && qp.b.size() == me && qp.h.size() == mi,
              "QpSolver: vector lengths");
  require_dim(qp.A.cols() == n || me == 0, "QpSolver: A width");
  require_dim(qp.G.cols() == n || mi == 0, "QpSolver: G width");

  QpResult res;
  res.x = Eigen::VectorXd::Zero(n);
  res.y = Eigen::VectorXd::Zero(me);
  res.z = Eigen::VectorXd::Zero(mi);

  const int dim = n + me + mi;
  std::vector<Triplet> trip;
  SpMat K(dim, dim);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(mi);

  auto factorize = [&](double reg) -> bool {
    kkt_triplets(qp, w, reg, trip);
    K.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_ || K.nonZeros() != pattern_nonzeros_) {
      ldlt_.analyzePattern(K);
      analyzed_ = true;
      pattern_nonzeros_ = K.nonZeros();
    }
    ldlt_.factorize(K);
    return ldlt_.info() == Eigen::Success;
  };

  auto factorize_retry = [&]() -> bool {
    double reg = cfg_.reg;
    for (int attempt = 0; attempt < 6; ++attempt, reg *= 100.0)
      if (factorize(reg)) return true;
    return false;
  };

  // One step of iterative refinement keeps the regularized solve honest.
  auto kkt_solve = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
    Eigen::VectorXd sol = ldlt_.solve(rhs);
    sol += ldlt_.solve(rhs - K.selfadjointView<Eigen::Upper>() * sol);
    return sol;
  };

  if (!factorize_retry()) return res;  // status = numerical

  // Starting point from the affine init solve (Wright's heuristic shifts).
  Eigen::VectorXd rhs(dim);
  rhs << -qp.q, qp.b, qp.h;
  Eigen::VectorXd sol = kkt_solve(rhs);
  res.x = sol.head(n);
  res.y = sol.segment(n, me);
  Eigen::VectorXd s;
  if (mi > 0) {
    Eigen::VectorXd zt = sol.tail(mi);  // equals Gx - h at the init solve
    s = -zt;
    res.z = zt;
    const double ds = std::max(-1.5 * s.minCoeff(), 0.0);
    const double dz = std::max(-1.5 * res.z.minCoeff(), 0.0);
    s.array() += ds;
    res.z.array() += dz;
    const double floor = 1.0;
    for (int i = 0; i < mi; ++i) {
      s[i] = std::max(s[i], floor * 1e-4);
      res.z[i] = std::max(res.z[i], floor * 1e-4);
    }
    const double mu0 = s.dot(res.z) / mi;
    s.array() += 0.5 * mu0 / std::max(res.z.mean(), 1e-8);
    res.z.array() += 0.5 * mu0 / std::max(s.mean(), 1e-8);
  }

  const double qn = 1.0 + qp.q.lpNorm<Eigen::Infinity>();
  const double bn = 1.0 + (me ? qp.b.lpNorm<Eigen::Infinity>() : 0.0);
  const double hn = 1.0 + (mi ? qp.h.lpNorm<Eigen::Infinity>() : 0.0);

  for (int iter = 0; iter < cfg_.max_iter; ++iter) {
    Eigen::VectorXd rd = qp.P * res.x + qp.q;  // P stored full symmetric
    if (me) rd += qp.A.transpose() * res.y;
    if (mi) rd += qp.G.transpose() * res.z;
    Eigen::VectorXd rp = me ? Eigen::VectorXd(qp.A * res.x - qp.b)
                            : Eigen::VectorXd(0);
    Eigen::VectorXd rg = mi ? Eigen::VectorXd(qp.G * res.x + s - qp.h)
                            : Eigen::VectorXd(0);
    const double mu = mi ? s.dot(res.z) / mi : 0.0;

    res.dual_res = rd.lpNorm<Eigen::Infinity>();
    res.primal_res = std::max(me ? rp.lpNorm<Eigen::Infinity>() : 0.0,
                              mi ? rg.lpNorm<Eigen::Infinity>() : 0.0);
    res.gap = mu;
    res.iterations = iter;

    const double obj =
        0.5 * res.x.dot(qp.P * res.x) + qp.q.dot(res.x);
    if (res.dual_res <= cfg_.tol * qn &&
        res.primal_res <= cfg_.tol * std::max(bn, hn) &&
        mu <= cfg_.tol * (1.0 + std::abs(obj))) {
      res.status = QpResult::Status::solved;
      return res;
    }

    if (mi == 0) {
      // Pure equality-constrained QP: one Newton solve finishes it.
      rhs.resize(dim);
      rhs << -rd, -rp;
      if (!factorize_retry()) return res;
      sol = kkt_solve(rhs);
      res.x += sol.head(n);
      res.y += sol.segment(n, me);
      continue;
    }

    for (int i = 0; i < mi; ++i)
      w[i] = std::clamp(s[i] / res.z[i], 1e-12, 1e12);
    if (!factorize_retry()) return res;

    // Predictor.
    rhs << -rd, -rp, -rg + s;
    sol = kkt_solve(rhs);
    Eigen::VectorXd dx = sol.head(n), dy = sol.segment(n, me),
                    dz = sol.tail(mi);
    Eigen::VectorXd dss = -s.array() - w.array() * dz.array();
    const double ap_aff = step_length(s, dss, 1.0);
    const double ad_aff = step_length(res.z, dz, 1.0);
    const double mu_aff =
        (s + ap_aff * dss).dot(res.z + ad_aff * dz) / mi;
    const double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);

    // Corrector.
    Eigen::VectorXd comp =
        (sigma * mu - dss.array() * dz.array()).matrix();
    rhs.tail(mi) = -rg + s - (comp.array() / res.z.array()).matrix();
    sol = kkt_solve(rhs);
    dx = sol.head(n);
    dy = sol.segment(n, me);
    dz = sol.tail(mi);
    dss = ((-s.array() * res.z.array() + comp.array()) / res.z.array()) -
          w.array() * dz.array();

    const double tau = 0.995;
    const double ap = step_length(s, dss, tau);
    const double ad = step_length(res.z, dz, tau);
    res.x += ap * dx;
    s += ap * dss;
    res.y += ad * dy;
    res.z += ad * dz;
    if (!res.x.allFinite() || !s.allFinite() || !res.z.allFinite()) {
      res.status = QpResult::Status::numerical;
      return res;
    }
  }
  res.status = QpResult::Status::max_iter;
  return res;
}

}  // namespace rsls
