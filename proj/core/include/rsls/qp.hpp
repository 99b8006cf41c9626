#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "rsls/errors.hpp"

namespace rsls {

// Convex quadratic program
//   min 0.5 x'Px + q'x   s.t.  A x = b,  G x <= h
// with P positive semidefinite. Variable bounds are expected to be folded
// into G by the caller.
struct QpProblem {
  Eigen::SparseMatrix<double> P, A, G;
  Eigen::VectorXd q, b, h;

  int n() const { return static_cast<int>(P.rows()); }
  int me() const { return static_cast<int>(A.rows()); }
  int mi() const { return static_cast<int>(G.rows()); }
};

struct QpResult {
  enum class Status { solved, max_iter, numerical };
  Status status = Status::numerical;
  Eigen::VectorXd x, y, z;  // primal, equality duals, inequality duals (z >= 0)
  int iterations = 0;
  double primal_res = 0, dual_res = 0, gap = 0;
};

struct QpConfig {
  int max_iter = 100;
  double tol = 1e-9;
  double reg = 1e-8;  // static regularization of the quasi-definite KKT system
};

// Primal-dual interior-point solver (predictor-corrector) on the regularized
// quasi-definite KKT system, factorized with a sparse LDLT. The symbolic
// analysis is reused across calls as long as the sparsity pattern of
// (P, A, G) does not change.
class QpSolver {
 public:
  explicit QpSolver(QpConfig cfg = {}) : cfg_(cfg) {}

  QpResult solve(const QpProblem& qp);

 private:
  QpConfig cfg_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> ldlt_;
  bool analyzed_ = false;
  Eigen::Index pattern_nonzeros_ = -1;
};

}  // namespace rsls
