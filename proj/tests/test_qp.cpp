#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "rsls/qp.hpp"
#include "test_util.hpp"

using namespace rsls;

namespace {

Eigen::SparseMatrix<double> sparse(const Eigen::MatrixXd& M) {
  return M.sparseView();
}

QpProblem make_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                  const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                  const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
  QpProblem qp;
  qp.P = sparse(P);
  qp.A = sparse(A);
  qp.A.conservativeResize(A.rows(), P.cols());
  qp.G = sparse(G);
  qp.G.conservativeResize(G.rows(), P.cols());
  qp.q = q;
  qp.b = b;
  qp.h = h;
  return qp;
}

void check_kkt(const QpProblem& qp, const QpResult& r, double tol) {
  Eigen::VectorXd stat = qp.P * r.x + qp.q;
  if (qp.me()) stat += qp.A.transpose() * r.y;
  if (qp.mi()) stat += qp.G.transpose() * r.z;
  CHECK(stat.lpNorm<Eigen::Infinity>() <= tol);
  if (qp.me())
    CHECK((qp.A * r.x - qp.b).lpNorm<Eigen::Infinity>() <= tol);
  if (qp.mi()) {
    Eigen::VectorXd slack = qp.h - qp.G * r.x;
    CHECK(slack.minCoeff() >= -tol);
    CHECK(r.z.minCoeff() >= -tol);
    CHECK((r.z.array() * slack.array()).abs().maxCoeff() <= tol);
  }
}

}  // namespace

TEST_SUITE("qp") {

TEST_CASE("scalar inequality, active and inactive") {
  // min 0.5 x^2 - x
  Eigen::MatrixXd P(1, 1), G(1, 1);
  P << 1.0;
  G << 1.0;
  Eigen::VectorXd q(1), h(1);
  q << -1.0;

  QpSolver solver;
  h << 0.3;  // binds: x* = 0.3, z* = 0.7
  auto r = solver.solve(make_qp(P, q, {}, {}, G, h));
  REQUIRE(r.status == QpResult::Status::solved);
  CHECK(r.x[0] == doctest::Approx(0.3).epsilon(1e-8));
  CHECK(r.z[0] == doctest::Approx(0.7).epsilon(1e-6));

  h << 2.0;  // slack: x* = 1, z* = 0
  r = solver.solve(make_qp(P, q, {}, {}, G, h));
  REQUIRE(r.status == QpResult::Status::solved);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.z[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("known planar solution") {
  // min (x1-1)^2 + (x2-2.5)^2 subject to
  //   -x1 + 2 x2 <= 2,  x1 + 2 x2 <= 6,  x1 - 2 x2 <= 2,  x >= 0.
  // Optimum at (1.4, 1.7).
  Eigen::MatrixXd P = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd q(2);
  q << -2.0, -5.0;
  Eigen::MatrixXd G(5, 2);
  G << -1, 2, 1, 2, 1, -2, -1, 0, 0, -1;
  Eigen::VectorXd h(5);
  h << 2, 6, 2, 0, 0;

  QpSolver solver;
  auto r = solver.solve(make_qp(P, q, {}, {}, G, h));
  REQUIRE(r.status == QpResult::Status::solved);
  CHECK(r.x[0] == doctest::Approx(1.4).epsilon(1e-7));
  CHECK(r.x[1] == doctest::Approx(1.7).epsilon(1e-7));
  check_kkt(make_qp(P, q, {}, {}, G, h), r, 1e-6);
}

TEST_CASE("equality-constrained QP matches dense KKT solve") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 8, me = 3;
    Eigen::MatrixXd M = testutil::random_matrix(rng, n, n);
    Eigen::MatrixXd P = M.transpose() * M + Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd A = testutil::random_matrix(rng, me, n);
    Eigen::VectorXd q = testutil::random_vector(rng, n);
    Eigen::VectorXd b = testutil::random_vector(rng, me);

    // Independent oracle: dense LU on the exact KKT system.
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + me, n + me);
    K.topLeftCorner(n, n) = P;
    K.topRightCorner(n, me) = A.transpose();
    K.bottomLeftCorner(me, n) = A;
    Eigen::VectorXd rhs(n + me);
    rhs << -q, b;
    Eigen::VectorXd sol = K.fullPivLu().solve(rhs);

    QpSolver solver;
    auto r = solver.solve(make_qp(P, q, A, b, {}, {}));
    REQUIRE(r.status == QpResult::Status::solved);
    CHECK((r.x - sol.head(n)).lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK((r.y - sol.tail(me)).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("random mixed QPs satisfy KKT conditions") {
  std::mt19937 rng(11);
  QpSolver solver;  // shared across trials: exercises pattern reuse
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 12, me = 4, mi = 10;
    Eigen::MatrixXd M = testutil::random_matrix(rng, n, n);
    Eigen::MatrixXd P = M.transpose() * M + Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd A = testutil::random_matrix(rng, me, n);
    Eigen::MatrixXd G = testutil::random_matrix(rng, mi, n);
    Eigen::VectorXd q = testutil::random_vector(rng, n);
    // Feasible by construction: b = A x0, h = G x0 + positive slack.
    Eigen::VectorXd x0 = testutil::random_vector(rng, n);
    Eigen::VectorXd b = A * x0;
    Eigen::VectorXd h =
        G * x0 + testutil::random_vector(rng, mi).cwiseAbs() +
        Eigen::VectorXd::Constant(mi, 0.1);

    auto qp = make_qp(P, q, A, b, G, h);
    auto r = solver.solve(qp);
    REQUIRE(r.status == QpResult::Status::solved);
    check_kkt(qp, r, 1e-6);
  }
}

TEST_CASE("deterministic across repeated solves") {
  std::mt19937 rng(3);
  const int n = 6, mi = 5;
  Eigen::MatrixXd M = testutil::random_matrix(rng, n, n);
  Eigen::MatrixXd P = M.transpose() * M + Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd G = testutil::random_matrix(rng, mi, n);
  Eigen::VectorXd q = testutil::random_vector(rng, n);
  Eigen::VectorXd h = Eigen::VectorXd::Constant(mi, 1.0);
  auto qp = make_qp(P, q, {}, {}, G, h);

  QpSolver s1, s2;
  auto r1 = s1.solve(qp);
  auto r2 = s2.solve(qp);
  REQUIRE(r1.status == QpResult::Status::solved);
  CHECK(r1.x == r2.x);
  CHECK(r1.z == r2.z);
  CHECK(r1.iterations == r2.iterations);
}

}  // TEST_SUITE
