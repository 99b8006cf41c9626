#include "rsls/blockops.hpp"

#include <cmath>
#include <string>

namespace rsls {

CausalOperator::CausalOperator(int T, int p, int q) : T_(T), p_(p), q_(q) {
  if (T < 0 || p <= 0 || q <= 0)
    throw DimensionError("CausalOperator: nonpositive dimension");
  blocks_.assign(static_cast<size_t>(T) * (T + 1) / 2,
                 Eigen::MatrixXd::Zero(p, q));
}

CausalOperator CausalOperator::identity(int T, int n) {
  CausalOperator M(T, n, n);
  for (int k = 0; k < T; ++k) M.block(k, 0) = Eigen::MatrixXd::Identity(n, n);
  return M;
}

int CausalOperator::index(int k, int j) const {
  if (k < 0 || k >= T_ || j < 0 || j > k)
    throw DimensionError("CausalOperator::block: index (k=" +
                         std::to_string(k) + ", j=" + std::to_string(j) +
                         ") outside causal triangle, T=" + std::to_string(T_));
  return k * (k + 1) / 2 + j;
}

Eigen::MatrixXd& CausalOperator::block(int k, int j) {
  return blocks_[static_cast<size_t>(index(k, j))];
}

const Eigen::MatrixXd& CausalOperator::block(int k, int j) const {
  return blocks_[static_cast<size_t>(index(k, j))];
}

CausalOperator& CausalOperator::operator+=(const CausalOperator& o) {
  require_dim(same_shape(o), "CausalOperator sum shapes");
  for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i] += o.blocks_[i];
  return *this;
}

CausalOperator& CausalOperator::operator-=(const CausalOperator& o) {
  require_dim(same_shape(o), "CausalOperator difference shapes");
  for (size_t i = 0; i < blocks_.size(); ++i) blocks_[i] -= o.blocks_[i];
  return *this;
}

double CausalOperator::max_abs() const {
  double m = 0.0;
  for (const auto& b : blocks_) {
    if (b.size() > 0) m = std::max(m, b.cwiseAbs().maxCoeff());
  }
  return m;
}

BlockDiagonal::BlockDiagonal(int T, int r, int c) : T_(T), r_(r), c_(c) {
  if (T < 0 || r <= 0 || c <= 0)
    throw DimensionError("BlockDiagonal: nonpositive dimension");
  blocks_.assign(static_cast<size_t>(T), Eigen::MatrixXd::Zero(r, c));
}

Eigen::MatrixXd& BlockDiagonal::block(int k) {
  if (k < 0 || k >= T_)
    throw DimensionError("BlockDiagonal::block: index k=" + std::to_string(k));
  return blocks_[static_cast<size_t>(k)];
}

const Eigen::MatrixXd& BlockDiagonal::block(int k) const {
  return const_cast<BlockDiagonal*>(this)->block(k);
}

Eigen::VectorXd apply(const CausalOperator& M, const Eigen::VectorXd& w) {
  require_dim(w.size() == M.cols(),
              "apply: input length " + std::to_string(w.size()) +
                  " vs operator columns " + std::to_string(M.cols()));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(M.rows());
  for (int k = 0; k < M.T(); ++k)
    for (int j = 0; j <= k; ++j)
      out.segment(k * M.p(), M.p()) +=
          M.block(k, j) * w.segment((k - j) * M.q(), M.q());
  return out;
}

CausalOperator shift_apply(const BlockDiagonal& N, const CausalOperator& M) {
  require_dim(N.T() == M.T(), "shift_apply: horizon");
  require_dim(N.c() == M.p(), "shift_apply: inner block dimension");
  CausalOperator out(M.T(), N.r(), M.q());
  for (int k = 1; k < M.T(); ++k)
    for (int j = 1; j <= k; ++j)
      out.block(k, j) = N.block(k - 1) * M.block(k - 1, j - 1);
  return out;
}

CausalOperator compose(const CausalOperator& A, const CausalOperator& B) {
  require_dim(A.T() == B.T(), "compose: horizon");
  require_dim(A.q() == B.p(), "compose: inner block dimension");
  CausalOperator out(A.T(), A.p(), B.q());
  for (int k = 0; k < A.T(); ++k)
    for (int j = 0; j <= k; ++j)
      for (int a = 0; a <= j; ++a)
        out.block(k, j) += A.block(k, a) * B.block(k - a, j - a);
  return out;
}

Eigen::MatrixXd block_row(const CausalOperator& M, int k) {
  if (k < -1 || k >= M.T())
    throw DimensionError("block_row: k=" + std::to_string(k));
  Eigen::MatrixXd row = Eigen::MatrixXd::Zero(M.p(), M.cols());
  if (k < 0) return row;
  for (int j = 0; j <= k; ++j)
    row.middleCols((k - j) * M.q(), M.q()) = M.block(k, j);
  return row;
}

Eigen::VectorXd transpose_row_action(const Eigen::VectorXd& c,
                                     const CausalOperator& M, int k) {
  require_dim(c.size() == M.p(), "transpose_row_action: row weight length");
  if (k < -1 || k >= M.T())
    throw DimensionError("transpose_row_action: k=" + std::to_string(k));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(M.cols());
  if (k < 0) return out;
  for (int j = 0; j <= k; ++j)
    out.segment((k - j) * M.q(), M.q()) = M.block(k, j).transpose() * c;
  return out;
}

}  // namespace rsls
