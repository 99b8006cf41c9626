#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "rsls/dynamics.hpp"
#include "rsls/nlp.hpp"
#include "rsls/remainder.hpp"
#include "rsls/sls_core.hpp"
#include "rsls/solver.hpp"

namespace rsls {

// c'(x; u) + b <= 0 along the horizon.
struct StageConstraint {
  Eigen::VectorXd c;
  double b = 0.0;
};

// c'x_T + b <= 0 at the end of the horizon.
struct TerminalConstraint {
  Eigen::VectorXd c;
  double b = 0.0;
};

enum class OcpMode {
  robust,   // full problem: parameter vertices, filter, tubes
  nominal,  // trajectory only, no error feedback
  offline,  // parameter set collapsed to {0}, disturbance set inflated
};

struct OcpSpec {
  UncertainModel model;
  int T = 0;
  std::vector<StageConstraint> constraints;
  std::vector<TerminalConstraint> terminal;
  MuBound mu;
  Eigen::MatrixXd Q, R, Qf;
  double lambda = 1e-6;  // Tikhonov weight on the whole decision vector
  std::optional<PerformanceSpec> performance;
  Eigen::VectorXd xbar;
  OcpMode mode = OcpMode::robust;
  // In offline mode the additive set gains identity columns of radius
  // offline_fraction * 0.01 to over-bound the discarded parametric effect.
  double offline_fraction = 0.0;
};

// Decision-vector layout: [z_0..z_T, v_0..v_{T-1}, Phi_x blocks,
// Phi_u blocks, sigma, tau, abs-slacks]. Blocks are stored column-major in
// delay order k(k+1)/2 + j. Nominal mode carries only z and v.
struct OcpLayout {
  int T = 0, nx = 0, nu = 0;
  OcpMode mode = OcpMode::robust;
  int off_z = 0, off_v = 0, off_phix = 0, off_phiu = 0;
  int off_sigma = 0, off_tau = 0, off_slack = 0;
  int n_slack = 0, n = 0;

  bool has_response() const { return mode != OcpMode::nominal; }
  static int tri(int k, int j) { return k * (k + 1) / 2 + j; }

  int z(int k, int i) const { return off_z + k * nx + i; }
  int v(int k, int i) const { return off_v + k * nu + i; }
  int phix(int k, int j, int r, int c) const {
    return off_phix + tri(k, j) * nx * nx + c * nx + r;
  }
  int phiu(int k, int j, int r, int c) const {
    return off_phiu + tri(k, j) * nu * nx + c * nu + r;
  }
  int sigma(int k, int i) const { return off_sigma + k * nx + i; }
  int tau(int k) const { return off_tau + k; }
  int slack(int q) const { return off_slack + q; }
};

struct OcpPoint {
  std::vector<Eigen::VectorXd> z, v;
  SlsResponse resp;  // in nominal mode: zero response at the sigma floor
};

struct OcpData;  // assembly internals (slack registry, row tables)

// Assembled problem: effective model (mode adjustments applied), parameter
// vertices, layout, and the solver-facing callback bundle.
// Positions of the inequality row families inside eval_in's output.
// Slack-definition rows occupy [0, off_filter); filter rows are ordered
// (k, i, vertex), tightening rows (k, constraint) then terminal, tau rows
// (k, stacked row), performance rows (step, output).
struct OcpRowMap {
  int off_filter = 0, off_tighten = 0, off_tau = 0, off_perf = 0;
  int n_filter = 0, n_tighten = 0, n_tau = 0, n_perf = 0;
};

struct Ocp {
  OcpSpec spec;
  UncertainModel model;  // Theta / E adjusted for the mode
  std::vector<Eigen::VectorXd> theta_vertices;
  OcpLayout layout;
  OcpRowMap rows;
  NlpProblem nlp;
  std::shared_ptr<const OcpData> data;
};

Ocp assemble(const OcpSpec& spec);

Eigen::VectorXd pack(const OcpLayout& L, const OcpPoint& pt);
OcpPoint unpack(const OcpLayout& L, const Eigen::VectorXd& beta);

// Overwrites the slack segment of beta with the exact absolute values of the
// terms they bound, making every epigraph group-sum equal its norm kernel.
void set_slacks_exact(const Ocp& ocp, Eigen::VectorXd& beta);

// Stage cost along the nominal trajectory (no regularization term).
double nominal_cost(const OcpSpec& spec, const std::vector<Eigen::VectorXd>& z,
                    const std::vector<Eigen::VectorXd>& v);

// Two-phase start: a nominal-only solve from the zero-input rollout, then
// Phi_u = 0, sigma from the filter constants at tau = 0, Phi_x propagated
// through the linearized dynamics, tau and slacks set exactly.
struct InitialGuess {
  Eigen::VectorXd beta;
  SolveReport nominal_report;  // meaningful in robust/offline modes
};
InitialGuess initial_guess(const Ocp& ocp, const SolverConfig& cfg);

// Re-evaluation of the original (unreformulated) constraint kernels at a
// candidate point; all maxima are signed, <= 0 means satisfied.
struct KernelCheck {
  double max_eq = 0;       // |dynamics / response-subspace residual|
  double max_filter = 0;   // filter_lhs - sigma
  double max_tighten = 0;  // tighten_lhs
  double max_tau = 0;      // tau_lhs - tau
  double max_perf = 0;     // perf_lhs - gamma
  double worst() const;
  bool ok(double tol) const { return worst() <= tol; }
};
KernelCheck verify_kernels(const Ocp& ocp, const OcpPoint& pt);

struct OcpSolution {
  OcpPoint point;
  CausalOperator K;
  SolveReport report;
  double nominal_cost = 0.0;
  KernelCheck check;
};

// Full pipeline: assemble, initial guess, solve, recover gains, verify the
// kernels (an "optimal" report that fails verification is downgraded to
// numerical).
OcpSolution solve_ocp(const OcpSpec& spec, const SolverConfig& cfg);

}  // namespace rsls
