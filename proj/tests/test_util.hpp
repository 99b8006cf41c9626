#pragma once

#include <Eigen/Dense>
#include <random>

#include "rsls/blockops.hpp"
#include "rsls/dynamics.hpp"
#include "rsls/ocp.hpp"

namespace testutil {

inline Eigen::MatrixXd random_matrix(std::mt19937& rng, int r, int c,
                                     double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = u(rng);
  return M;
}

inline Eigen::VectorXd random_vector(std::mt19937& rng, int n,
                                     double scale = 1.0) {
  return random_matrix(rng, n, 1, scale);
}

inline rsls::CausalOperator random_causal(std::mt19937& rng, int T, int p,
                                          int q, double scale = 1.0) {
  rsls::CausalOperator M(T, p, q);
  for (int k = 0; k < T; ++k)
    for (int j = 0; j <= k; ++j) M.block(k, j) = random_matrix(rng, p, q, scale);
  return M;
}

// x+ = A x + B u, exact Jacobians known, no parametric part.
inline rsls::UncertainModel linear_model(const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& B) {
  rsls::UncertainModel m;
  m.nx = static_cast<int>(A.rows());
  m.nu = static_cast<int>(B.cols());
  m.ntheta = 0;
  m.fbar = [A, B](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return Eigen::VectorXd(A * x + B * u);
  };
  m.ftheta = [nx = m.nx](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(nx, 0);
  };
  m.E = rsls::BoxImageSet{Eigen::MatrixXd::Zero(m.nx, 1)};
  m.Theta = rsls::ParamBox(Eigen::VectorXd(0), Eigen::VectorXd(0));
  return m;
}

// Reference curvature bounds for the default satellite model (frozen from an
// independent sampling study; exact values are not load-bearing for assembly
// or solve tests).
inline Eigen::VectorXd satellite_mu_reference() {
  Eigen::VectorXd mu(6);
  mu << 0.285, 0.285, 0.0, 1.446, 1.429, 0.0;
  return mu;
}

// Standard benchmark instance: unit box on states and inputs, quadratic
// stage cost, performance bound on the state response.
inline rsls::OcpSpec satellite_spec(rsls::OcpMode mode = rsls::OcpMode::robust,
                                    int T = 10) {
  rsls::OcpSpec spec;
  spec.model = rsls::satellite_model();
  spec.T = T;
  const int nx = spec.model.nx, nu = spec.model.nu;
  for (int i = 0; i < nx + nu; ++i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nx + nu);
    c[i] = 1.0;
    spec.constraints.push_back({c, -1.0});
    spec.constraints.push_back({-c, -1.0});
  }
  for (int i = 0; i < nx; ++i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
    c[i] = 1.0;
    spec.terminal.push_back({c, -1.0});
    spec.terminal.push_back({-c, -1.0});
  }
  spec.mu.mu = satellite_mu_reference();
  spec.Q = Eigen::MatrixXd::Identity(nx, nx);
  spec.R = Eigen::MatrixXd::Identity(nu, nu);
  spec.Qf = 10.0 * spec.Q;
  spec.lambda = 1e-6;
  rsls::PerformanceSpec perf;
  perf.C = rsls::CausalOperator::identity(T, nx);
  perf.D = rsls::CausalOperator(T, nx, nu);
  perf.gamma = 0.2;
  spec.performance = perf;
  spec.xbar = (Eigen::VectorXd(6) << 0.7, 0.7, 0.5, 0.5, 0.5, 0.5).finished();
  spec.mode = mode;
  return spec;
}

}  // namespace testutil
