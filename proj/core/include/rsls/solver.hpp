#pragma once

#include <cstdint>
#include <utility>

#include "rsls/nlp.hpp"
#include "rsls/qp.hpp"

namespace rsls {

struct SolverConfig {
  int max_iter = 200;
  double tol_kkt = 1e-6;
  double tol_feas = 1e-7;
  double rho_init = 10.0;      // l1 merit penalty
  double rho_growth = 10.0;
  double rho_max = 1e8;
  double delta_init = 1e-4;    // Levenberg regularization of the QP Hessian
  double delta_min = 1e-10;
  double delta_max = 1e10;
  int stall_limit = 20;        // iterations of stalled infeasibility at rho_max
  std::uint64_t seed = 0;      // recorded for reproducibility (method is deterministic)
  bool verbose = false;
  QpConfig qp;
};

struct SolveReport {
  enum class Status { optimal, infeasible, max_iter, numerical };
  Status status = Status::numerical;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double violation = 0.0;
  int iterations = 0;
  double wall_time_s = 0.0;
};

const char* to_string(SolveReport::Status s);

// Sequential quadratic programming with an exact l1 merit function.
// Each subproblem carries elastic variables on the equalities and on the
// flagged inequality rows, so it is always feasible; the penalty weight
// is driven above the multiplier norm to keep the merit exact.
std::pair<Eigen::VectorXd, SolveReport> solve(const NlpProblem& p,
                                              const SolverConfig& cfg,
                                              const Eigen::VectorXd& beta0);

}  // namespace rsls
