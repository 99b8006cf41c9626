#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rsls/errors.hpp"

namespace rsls {

// Block lower-triangular causal operator over a horizon of T steps.
//
// Storage holds the T*(T+1)/2 structurally nonzero blocks of size p x q.
// block(k, j) is the block in row k with delay j (j = 0 is the diagonal),
// so row k laid out densely reads [block(k,k), ..., block(k,0), 0, ..., 0].
class CausalOperator {
 public:
  CausalOperator() = default;
  CausalOperator(int T, int p, int q);

  static CausalOperator identity(int T, int n);

  int T() const { return T_; }
  int p() const { return p_; }
  int q() const { return q_; }
  int rows() const { return T_ * p_; }
  int cols() const { return T_ * q_; }

  Eigen::MatrixXd& block(int k, int j);
  const Eigen::MatrixXd& block(int k, int j) const;

  bool same_shape(const CausalOperator& o) const {
    return T_ == o.T_ && p_ == o.p_ && q_ == o.q_;
  }

  CausalOperator& operator+=(const CausalOperator& o);
  CausalOperator& operator-=(const CausalOperator& o);

  // Largest absolute entry over all structural blocks.
  double max_abs() const;

 private:
  int index(int k, int j) const;
  int T_ = 0, p_ = 0, q_ = 0;
  std::vector<Eigen::MatrixXd> blocks_;
};

// T blocks on the block diagonal; blocks may be rectangular (r x c) so the
// same type stores the stacked A and B Jacobian sequences.
class BlockDiagonal {
 public:
  BlockDiagonal() = default;
  BlockDiagonal(int T, int r, int c);

  int T() const { return T_; }
  int r() const { return r_; }
  int c() const { return c_; }

  Eigen::MatrixXd& block(int k);
  const Eigen::MatrixXd& block(int k) const;

 private:
  int T_ = 0, r_ = 0, c_ = 0;
  std::vector<Eigen::MatrixXd> blocks_;
};

// y_k = sum_{j<=k} M^{k,j} w_{k-j}.
Eigen::VectorXd apply(const CausalOperator& M, const Eigen::VectorXd& w);

// Z * N * M where Z is the block downshift: output row k is
// N_{k-1} * (row k-1 of M); row 0 is zero.
CausalOperator shift_apply(const BlockDiagonal& N, const CausalOperator& M);

// (A*B)^{k,j} = sum_{a=0..j} A^{k,a} B^{k-a, j-a}.
CausalOperator compose(const CausalOperator& A, const CausalOperator& B);

// Row k of M as a dense p x (q*T) matrix. k = -1 yields the zero matrix
// (the step-0 convention: nothing has been fed back yet).
Eigen::MatrixXd block_row(const CausalOperator& M, int k);

// c^T * (row k of M) as a length q*T vector; k = -1 yields zeros.
Eigen::VectorXd transpose_row_action(const Eigen::VectorXd& c,
                                     const CausalOperator& M, int k);

}  // namespace rsls
