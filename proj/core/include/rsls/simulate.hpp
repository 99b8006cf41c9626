#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rsls/ocp.hpp"
#include "rsls/sls_core.hpp"

namespace rsls {

// One closed-loop trajectory of the true uncertain system together with the
// constraint values and tube-containment flags recomputed along it.
struct RolloutResult {
  std::vector<Eigen::VectorXd> x;  // T+1 states
  std::vector<Eigen::VectorXd> u;  // T inputs
  Eigen::VectorXd theta;           // realized parameter
  std::vector<Eigen::VectorXd> w;  // T realized disturbances

  // stage_values[k][i] = c_i'(x_k; u_k) + b_i; terminal_values likewise at T.
  std::vector<Eigen::VectorXd> stage_values;
  Eigen::VectorXd terminal_values;

  // Per-step, per-coordinate containment in the synthesized tube.
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> x_inside;  // T+1
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> u_inside;  // T

  int violations = 0;               // constraint values above tolerance
  double max_constraint = 0.0;      // largest signed constraint value
  double max_tube_exceedance = 0.0; // largest tube overshoot, 0 if contained

  bool inside_tube() const { return max_tube_exceedance <= 1e-9; }
};

// Rolls out x_{k+1} = fbar(x_k,u_k) + ftheta(x_k,u_k) theta + w_k from
// spec.xbar under the causal affine feedback
//   u_k = v_k + sum_{j=0}^{k-1} K^{k-1,j} (x_{k-j} - z_{k-j}),  u_0 = v_0,
// using the gains stored in sol (open loop when sol.K is empty). Unless
// force is set, theta must lie in the model's parameter box and every w_k
// must have a unit-box preimage under the additive generator matrix.
RolloutResult closed_loop_rollout(const UncertainModel& model,
                                  const OcpSpec& spec, const SlsSolution& sol,
                                  const Eigen::VectorXd& theta,
                                  const std::vector<Eigen::VectorXd>& w_seq,
                                  bool force = false);

// Monte-Carlo study over admissible (theta, w): theta alternates between
// random box vertices and uniform interior points, disturbances are uniform
// over the generator image. Deterministic for a fixed seed.
struct McSummary {
  int n_runs = 0;
  int violations = 0;   // runs with at least one constraint violation
  int tube_exits = 0;   // runs leaving the tube at any step/coordinate
  double max_violation = 0.0;       // worst positive constraint value seen
  double max_tube_exceedance = 0.0;
  // Worst signed constraint value per step over all runs; entry T covers the
  // terminal constraints. Empty when n_runs = 0.
  std::vector<double> step_margin;
};
McSummary monte_carlo_verify(const UncertainModel& model, const OcpSpec& spec,
                             const SlsSolution& sol, int n_runs,
                             unsigned seed);

// Coordinate ascent over disturbance sign patterns (w_k = E d_k,
// d_k in {-1,1}^q) and parameter vertices, maximizing the peak constraint
// value of the closed-loop rollout.
struct AdversarialResult {
  Eigen::VectorXd theta;
  std::vector<Eigen::VectorXd> w;
  RolloutResult rollout;
  double peak = 0.0;  // = rollout.max_constraint
};
AdversarialResult adversarial_search(const UncertainModel& model,
                                     const OcpSpec& spec,
                                     const SlsSolution& sol,
                                     int max_sweeps = 8);

}  // namespace rsls
