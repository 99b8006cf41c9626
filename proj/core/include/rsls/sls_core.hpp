#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rsls/blockops.hpp"
#include "rsls/dynamics.hpp"
#include "rsls/remainder.hpp"
#include "rsls/sets.hpp"

namespace rsls {

// Closed-loop response pair with its diagonal noise filter and the
// linearization-radius over-bounds tau.
struct SlsResponse {
  CausalOperator Phi_x;          // L^{T, nx x nx}
  CausalOperator Phi_u;          // L^{T, nu x nx}
  std::vector<Eigen::VectorXd> sigma;  // T diagonal blocks sigma_0..sigma_{T-1}
  Eigen::VectorXd tau;                 // T nonnegative scalars

  int T() const { return Phi_x.T(); }
  int nx() const { return Phi_x.p(); }
  int nu() const { return Phi_u.p(); }
};

inline constexpr double kSigmaMin = 1e-8;

// Per-step boxes guaranteed to contain every closed-loop state/input.
struct Tube {
  std::vector<Eigen::VectorXd> z, v;                    // centers
  std::vector<Eigen::VectorXd> x_halfwidth, u_halfwidth;
};

// Robust performance requirement ||C Phi_x + D Phi_u||_inf <= gamma.
struct PerformanceSpec {
  CausalOperator C, D;
  double gamma = 0.0;
};

// Everything a solved instance carries besides the report.
struct SlsSolution {
  std::vector<Eigen::VectorXd> z, v;
  SlsResponse resp;
  CausalOperator K;
};

// Affine-subspace residual: Phi_x - Z Atilde Phi_x - Z Btilde Phi_u - Sigma,
// with Atilde = blkdiag(A_1..A_{T-1}, 0) built from the supplied Jacobian
// sequence (A_seq[0] is unused). Zero iff the responses are consistent with
// the LTV dynamics driven through the filter.
CausalOperator slp_residual(const std::vector<Eigen::MatrixXd>& A_seq,
                            const std::vector<Eigen::MatrixXd>& B_seq,
                            const SlsResponse& resp);

// Stacked response row [Phi_x^{k}; Phi_u^{k}] as a dense
// (nx+nu) x (nx*T) matrix; k = -1 gives zeros.
Eigen::MatrixXd stacked_row(const SlsResponse& resp, int k);

// Left-hand side of the filter over-bounding row for step k, coordinate i,
// at one parameter vertex:
//   || e_i^T [ (A_th*th) Phi_x^{k-1} + (B_th*th) Phi_u^{k-1},
//              f_theta(z_k,v_k) th, E, tau_k^2 mu ] ||_1
// which must not exceed sigma_{k,i}.
double filter_lhs(int k, int i, const Eigen::VectorXd& theta_vertex,
                  const ParamJacobians& theta_jac,
                  const Eigen::MatrixXd& ftheta_zv, const BoxImageSet& E,
                  const Eigen::VectorXd& mu, const SlsResponse& resp);

// Same row split into its (parametric, linearization, additive) column
// groups; the three parts sum to filter_lhs.
struct FilterParts {
  double parametric = 0, linearization = 0, additive = 0;
  double total() const { return parametric + linearization + additive; }
};
FilterParts decompose_filter(int k, int i, const Eigen::VectorXd& theta_vertex,
                             const ParamJacobians& theta_jac,
                             const Eigen::MatrixXd& ftheta_zv,
                             const BoxImageSet& E, const Eigen::VectorXd& mu,
                             const SlsResponse& resp);

// Tightened stage constraint value at step k:
//   c^T (z_k; v_k) + b + || c^T [Phi_x^{k-1}; Phi_u^{k-1}] ||_1  (<= 0).
double tighten_lhs(const Eigen::VectorXd& c, double b, const Eigen::VectorXd& z_k,
                   const Eigen::VectorXd& v_k, const SlsResponse& resp, int k);

// Terminal variant: c_f^T z_T + b_f + || c_f^T Phi_x^{T-1} ||_1.
double tighten_terminal_lhs(const Eigen::VectorXd& c_f, double b_f,
                            const Eigen::VectorXd& z_T, const SlsResponse& resp);

// || [Phi_x^{k-1}; Phi_u^{k-1}] ||_inf (max absolute row sum); 0 at k = 0.
double tau_lhs(const SlsResponse& resp, int k);

// || C Phi_x + D Phi_u ||_inf over the full stacked matrix.
double perf_lhs(const PerformanceSpec& spec, const SlsResponse& resp);

// K = Phi_u Phi_x^{-1} by block forward substitution down the delay
// structure; requires the diagonal filter entries to be safely positive.
CausalOperator recover_gains(const SlsResponse& resp);

// Reachable boxes around the nominal trajectory: state half-width at step k
// is the row-wise 1-norm of Phi_x^{k-1}, input half-width that of Phi_u^{k-1}.
Tube tubes(const std::vector<Eigen::VectorXd>& z,
           const std::vector<Eigen::VectorXd>& v, const SlsResponse& resp);

}  // namespace rsls
