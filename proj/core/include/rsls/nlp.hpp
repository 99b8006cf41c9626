#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <vector>

namespace rsls {

// Backend-neutral smooth NLP
//   min 0.5 b'H0 b + g0'b
//   s.t. c_eq(b) = 0, c_in(b) <= 0, lb <= b <= ub
// with a constant (quadratic-objective) Hessian. Jacobian callbacks must
// emit their triplets in a fixed order with a fixed sparsity pattern so a
// backend can reuse symbolic factorizations.
struct NlpProblem {
  int n = 0;
  Eigen::VectorXd lb, ub;
  int m_eq = 0, m_in = 0;

  Eigen::SparseMatrix<double> H0;  // full symmetric
  Eigen::VectorXd g0;

  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval_eq;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval_in;
  std::function<void(const Eigen::VectorXd&,
                     std::vector<Eigen::Triplet<double>>&)> jac_eq;
  std::function<void(const Eigen::VectorXd&,
                     std::vector<Eigen::Triplet<double>>&)> jac_in;

  // Inequality rows that receive an elastic relaxation variable in SQP
  // subproblems (rows that can conflict with the current linearization).
  std::vector<std::uint8_t> elastic;

  double objective(const Eigen::VectorXd& b) const {
    return 0.5 * b.dot(H0 * b) + g0.dot(b);
  }
};

}  // namespace rsls
