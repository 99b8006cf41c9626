#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "rsls/errors.hpp"
#include "rsls/sets.hpp"

namespace rsls {

// Per-parameter Jacobian stacks of the parametric maps: A[p], B[p] are the
// state/input Jacobians of column p of f_theta.
struct ParamJacobians {
  std::vector<Eigen::MatrixXd> A, B;
};

struct Linearization {
  Eigen::MatrixXd A, B;   // Jacobians of fbar
  ParamJacobians theta;   // Jacobians of each f_theta column
};

// Discrete-time uncertain model x+ = fbar(x,u) + ftheta(x,u) * theta + w,
// with w in the image set E * B_inf and theta in a box.
//
// Derivative oracles are optional; finite differences are substituted when a
// callback is empty.
struct UncertainModel {
  int nx = 0, nu = 0, ntheta = 0;

  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> fbar;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> ftheta;

  // Optional analytic oracles.
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&,
                     Eigen::MatrixXd&, Eigen::MatrixXd&)> jac_bar;
  std::function<ParamJacobians(const Eigen::VectorXd&, const Eigen::VectorXd&)> jac_theta;
  // Hessian of component i of the full map at (x, u, theta), size
  // (nx+nu) x (nx+nu).
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::VectorXd&, int)> hessian;

  BoxImageSet E;
  ParamBox Theta;
};

// fbar + ftheta * theta.
Eigen::VectorXd step(const UncertainModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& theta);

// z_0 = xbar, z_{k+1} = fbar(z_k, v_k). Throws NumericalError naming the
// step index if the state leaves the finite range.
std::vector<Eigen::VectorXd> rollout_nominal(
    const UncertainModel& model, const Eigen::VectorXd& xbar,
    const std::vector<Eigen::VectorXd>& v_seq);

// Jacobians of fbar and of each f_theta column at (z, v): analytic oracles
// when the model provides them, otherwise central differences with step
// 1e-6 * max(1, |coordinate|).
Linearization jacobians_fd(const UncertainModel& model,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& v);

// Hessian of component i of fbar + ftheta*theta by second-order central
// differences (used as fallback and as a cross-check oracle).
Eigen::MatrixXd hessian_fd(const UncertainModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& theta,
                           int i);

// Hessian via the model oracle when present, else hessian_fd.
Eigen::MatrixXd hessian(const UncertainModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& theta,
                        int i);

// Forward-Euler composition: outer step h split into `substeps` inner steps.
struct Discretizer {
  double h = 0.5;
  int substeps = 10;
};

// Planar rigid body with body-frame thrust (v_x, v_y), uncertain inverse
// inertia 1/j = 1 + delta: p'' = R(psi) (v_x, v_y) / m, psi'' = l v_x (1+delta).
// State (p_x, p_y, psi, pdot_x, pdot_y, psidot). The discrete-time model is
// defined affine in delta: fbar is the Euler composition at delta = 0 and
// f_theta collects the delta-proportional torque increment h*l*v_x in the
// psidot component. Analytic Jacobians and Hessians are attached.
UncertainModel satellite_model(double m_mass = 1.0, double l_arm = 1.0,
                               double delta_bound = 0.01,
                               const Discretizer& disc = {});

}  // namespace rsls
