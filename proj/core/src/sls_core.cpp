#include "rsls/sls_core.hpp"

#include <cmath>
#include <string>

namespace rsls {

namespace {

void check_resp(const SlsResponse& resp) {
  require_dim(resp.Phi_x.T() == resp.Phi_u.T(), "response horizons");
  require_dim(resp.Phi_x.q() == resp.Phi_x.p() && resp.Phi_u.q() == resp.Phi_x.p(),
              "response block widths");
  require_dim(static_cast<int>(resp.sigma.size()) == resp.T(),
              "filter block count");
  require_dim(resp.tau.size() == resp.T(), "tau length");
}

}  // namespace

CausalOperator slp_residual(const std::vector<Eigen::MatrixXd>& A_seq,
                            const std::vector<Eigen::MatrixXd>& B_seq,
                            const SlsResponse& resp) {
  check_resp(resp);
  const int T = resp.T(), nx = resp.nx(), nu = resp.nu();
  require_dim(static_cast<int>(A_seq.size()) == T &&
                  static_cast<int>(B_seq.size()) == T,
              "slp_residual: Jacobian sequence length");

  BlockDiagonal Atil(T, nx, nx), Btil(T, nx, nu);
  for (int t = 0; t + 1 < T; ++t) {
    require_dim(A_seq[t + 1].rows() == nx && A_seq[t + 1].cols() == nx,
                "slp_residual: A block shape");
    require_dim(B_seq[t + 1].rows() == nx && B_seq[t + 1].cols() == nu,
                "slp_residual: B block shape");
    Atil.block(t) = A_seq[t + 1];
    Btil.block(t) = B_seq[t + 1];
  }

  CausalOperator res = resp.Phi_x;
  res -= shift_apply(Atil, resp.Phi_x);
  res -= shift_apply(Btil, resp.Phi_u);
  for (int k = 0; k < T; ++k)
    res.block(k, 0) -= Eigen::MatrixXd(resp.sigma[k].asDiagonal());
  return res;
}

Eigen::MatrixXd stacked_row(const SlsResponse& resp, int k) {
  check_resp(resp);
  const int nx = resp.nx(), nu = resp.nu();
  Eigen::MatrixXd row(nx + nu, resp.Phi_x.cols());
  row.topRows(nx) = block_row(resp.Phi_x, k);
  row.bottomRows(nu) = block_row(resp.Phi_u, k);
  return row;
}

namespace {

FilterParts filter_parts(int k, int i, const Eigen::VectorXd& theta_vertex,
                         const ParamJacobians& theta_jac,
                         const Eigen::MatrixXd& ftheta_zv, const BoxImageSet& E,
                         const Eigen::VectorXd& mu, const SlsResponse& resp) {
  check_resp(resp);
  const int nx = resp.nx(), nu = resp.nu();
  if (k < 0 || k >= resp.T())
    throw DimensionError("filter row: k=" + std::to_string(k));
  require_dim(i >= 0 && i < nx, "filter row: coordinate index");
  const int ntheta = static_cast<int>(theta_vertex.size());
  require_dim(static_cast<int>(theta_jac.A.size()) == ntheta &&
                  static_cast<int>(theta_jac.B.size()) == ntheta,
              "filter row: parametric Jacobian count");

  FilterParts parts;

  // Parametric columns: row i of (A_th*th) Phi_x^{k-1} + (B_th*th) Phi_u^{k-1}
  // plus the direct f_theta*theta injection.
  if (ntheta > 0) {
    Eigen::VectorXd ax = Eigen::VectorXd::Zero(nx);
    Eigen::VectorXd bu = Eigen::VectorXd::Zero(nu);
    for (int p = 0; p < ntheta; ++p) {
      ax += theta_vertex[p] * theta_jac.A[p].row(i).transpose();
      bu += theta_vertex[p] * theta_jac.B[p].row(i).transpose();
    }
    if (k >= 1) {
      Eigen::VectorXd row = transpose_row_action(ax, resp.Phi_x, k - 1) +
                            transpose_row_action(bu, resp.Phi_u, k - 1);
      parts.parametric += row.lpNorm<1>();
    }
    parts.parametric += std::abs((ftheta_zv.row(i) * theta_vertex)(0));
  }

  parts.additive = E.E.row(i).lpNorm<1>();
  const double tk = resp.tau[k];
  parts.linearization = tk * tk * mu[i];
  return parts;
}

}  // namespace

double filter_lhs(int k, int i, const Eigen::VectorXd& theta_vertex,
                  const ParamJacobians& theta_jac,
                  const Eigen::MatrixXd& ftheta_zv, const BoxImageSet& E,
                  const Eigen::VectorXd& mu, const SlsResponse& resp) {
  return filter_parts(k, i, theta_vertex, theta_jac, ftheta_zv, E, mu, resp)
      .total();
}

FilterParts decompose_filter(int k, int i, const Eigen::VectorXd& theta_vertex,
                             const ParamJacobians& theta_jac,
                             const Eigen::MatrixXd& ftheta_zv,
                             const BoxImageSet& E, const Eigen::VectorXd& mu,
                             const SlsResponse& resp) {
  return filter_parts(k, i, theta_vertex, theta_jac, ftheta_zv, E, mu, resp);
}

double tighten_lhs(const Eigen::VectorXd& c, double b, const Eigen::VectorXd& z_k,
                   const Eigen::VectorXd& v_k, const SlsResponse& resp, int k) {
  const int nx = resp.nx(), nu = resp.nu();
  require_dim(c.size() == nx + nu, "tighten_lhs: constraint row length");
  require_dim(z_k.size() == nx && v_k.size() == nu, "tighten_lhs: point dims");
  const double nominal = c.head(nx).dot(z_k) + c.tail(nu).dot(v_k) + b;
  if (k == 0) return nominal;
  const Eigen::VectorXd row =
      transpose_row_action(c.head(nx), resp.Phi_x, k - 1) +
      transpose_row_action(c.tail(nu), resp.Phi_u, k - 1);
  return nominal + row.lpNorm<1>();
}

double tighten_terminal_lhs(const Eigen::VectorXd& c_f, double b_f,
                            const Eigen::VectorXd& z_T, const SlsResponse& resp) {
  require_dim(c_f.size() == resp.nx(), "tighten_terminal_lhs: row length");
  const double nominal = c_f.dot(z_T) + b_f;
  return nominal +
         transpose_row_action(c_f, resp.Phi_x, resp.T() - 1).lpNorm<1>();
}

double tau_lhs(const SlsResponse& resp, int k) {
  if (k == 0) return 0.0;
  return stacked_row(resp, k - 1).cwiseAbs().rowwise().sum().maxCoeff();
}

double perf_lhs(const PerformanceSpec& spec, const SlsResponse& resp) {
  CausalOperator out = compose(spec.C, resp.Phi_x);
  out += compose(spec.D, resp.Phi_u);
  double worst = 0.0;
  for (int k = 0; k < out.T(); ++k)
    worst = std::max(
        worst, block_row(out, k).cwiseAbs().rowwise().sum().maxCoeff());
  return worst;
}

CausalOperator recover_gains(const SlsResponse& resp) {
  check_resp(resp);
  const int T = resp.T(), nu = resp.nu(), nx = resp.nx();
  std::vector<Eigen::MatrixXd> diag_inv(static_cast<size_t>(T));
  for (int k = 0; k < T; ++k) {
    if (resp.sigma[k].minCoeff() < kSigmaMin)
      throw NumericalError("recover_gains: filter block " + std::to_string(k) +
                           " below the positivity floor");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(resp.Phi_x.block(k, 0));
    if (!lu.isInvertible())
      throw NumericalError("recover_gains: singular diagonal response block " +
                           std::to_string(k));
    diag_inv[static_cast<size_t>(k)] = lu.inverse();
  }
  // K Phi_x = Phi_u, solved block-wise: the delay-j block only involves
  // gains of delay < j and the invertible diagonal Phi_x^{k-j,0}.
  CausalOperator K(T, nu, nx);
  for (int k = 0; k < T; ++k) {
    for (int j = 0; j <= k; ++j) {
      Eigen::MatrixXd rhs = resp.Phi_u.block(k, j);
      for (int a = 0; a < j; ++a)
        rhs -= K.block(k, a) * resp.Phi_x.block(k - a, j - a);
      K.block(k, j) = rhs * diag_inv[static_cast<size_t>(k - j)];
    }
  }
  return K;
}

Tube tubes(const std::vector<Eigen::VectorXd>& z,
           const std::vector<Eigen::VectorXd>& v, const SlsResponse& resp) {
  check_resp(resp);
  const int T = resp.T();
  require_dim(static_cast<int>(z.size()) == T + 1, "tubes: state sequence length");
  require_dim(static_cast<int>(v.size()) == T, "tubes: input sequence length");
  Tube tube;
  tube.z = z;
  tube.v = v;
  for (int k = 0; k <= T; ++k)
    tube.x_halfwidth.push_back(
        block_row(resp.Phi_x, k - 1).cwiseAbs().rowwise().sum());
  for (int k = 0; k < T; ++k)
    tube.u_halfwidth.push_back(
        block_row(resp.Phi_u, k - 1).cwiseAbs().rowwise().sum());
  return tube;
}

}  // namespace rsls
