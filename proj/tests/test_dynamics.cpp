#include <doctest.h>

#include <random>

#include "rsls/dynamics.hpp"
#include "test_util.hpp"

using namespace rsls;

TEST_SUITE_BEGIN("dynamics");

TEST_CASE("rollout_nominal: scalar integrator") {
  auto m = testutil::linear_model(Eigen::MatrixXd::Identity(1, 1),
                                  Eigen::MatrixXd::Identity(1, 1));
  std::vector<Eigen::VectorXd> v(2, Eigen::VectorXd::Ones(1));
  auto z = rollout_nominal(m, Eigen::VectorXd::Zero(1), v);
  REQUIRE(z.size() == 3);
  CHECK(z[0][0] == 0.0);
  CHECK(z[1][0] == 1.0);
  CHECK(z[2][0] == 2.0);
}

TEST_CASE("rollout_nominal: empty input sequence returns the start point") {
  auto m = testutil::linear_model(Eigen::MatrixXd::Identity(2, 2),
                                  Eigen::MatrixXd::Identity(2, 2));
  auto z = rollout_nominal(m, Eigen::VectorXd::Ones(2), {});
  REQUIRE(z.size() == 1);
  CHECK((z[0] - Eigen::VectorXd::Ones(2)).norm() == 0.0);
}

TEST_CASE("rollout_nominal: divergence is reported with the step index") {
  UncertainModel m;
  m.nx = 1;
  m.nu = 1;
  m.ntheta = 0;
  m.fbar = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, x[0] * x[0]);
  };
  std::vector<Eigen::VectorXd> v(4, Eigen::VectorXd::Zero(1));
  CHECK_THROWS_AS(rollout_nominal(m, Eigen::VectorXd::Constant(1, 1e200), v),
                  NumericalError);
}

TEST_CASE("satellite: coasting keeps attitude and velocity, drifts position") {
  auto m = satellite_model();
  Eigen::VectorXd x0(6);
  x0 << 0.7, 0.7, 0.5, 0.5, 0.5, 0.5;
  std::vector<Eigen::VectorXd> v(4, Eigen::VectorXd::Zero(2));
  auto z = rollout_nominal(m, x0, v);
  for (int k = 0; k <= 4; ++k) {
    CHECK(z[k][2] == doctest::Approx(0.5 + 0.5 * 0.5 * k).epsilon(1e-12));
    CHECK(z[k][3] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(z[k][4] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(z[k][5] == doctest::Approx(0.5).epsilon(1e-12));
    // position integrates the constant velocity exactly under Euler substeps
    CHECK(z[k][0] == doctest::Approx(0.7 + 0.5 * 0.5 * k).epsilon(1e-12));
  }
}

TEST_CASE("satellite: rest with zero thrust is a fixed point") {
  auto m = satellite_model();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6);
  x0[2] = 0.3;  // attitude alone does not move anything
  Eigen::VectorXd x1 = m.fbar(x0, Eigen::VectorXd::Zero(2));
  CHECK((x1 - x0).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("satellite: parameter box and parametric map shape") {
  auto m = satellite_model(1.0, 1.0, 0.01);
  CHECK(m.Theta.lower[0] == doctest::Approx(-0.01));
  CHECK(m.Theta.upper[0] == doctest::Approx(0.01));
  Eigen::VectorXd x = Eigen::VectorXd::Random(6);
  Eigen::VectorXd u(2);
  u << 0.8, -0.3;
  Eigen::MatrixXd F = m.ftheta(x, u);
  REQUIRE(F.rows() == 6);
  REQUIRE(F.cols() == 1);
  CHECK(F.topRows(5).norm() == 0.0);
  CHECK(F(5, 0) == doctest::Approx(0.5 * 1.0 * 0.8).epsilon(1e-12));
}

TEST_CASE("satellite: nonpositive mass is rejected") {
  CHECK_THROWS_AS(satellite_model(0.0), std::invalid_argument);
}

TEST_CASE("jacobians_fd: exact on a linear model") {
  std::mt19937 rng(21);
  Eigen::MatrixXd A = testutil::random_matrix(rng, 3, 3);
  Eigen::MatrixXd B = testutil::random_matrix(rng, 3, 2);
  auto m = testutil::linear_model(A, B);
  auto lin = jacobians_fd(m, Eigen::VectorXd::Random(3), Eigen::VectorXd::Random(2));
  CHECK((lin.A - A).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK((lin.B - B).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("jacobians_fd: zero parametric map gives zero stacks") {
  auto m = testutil::linear_model(Eigen::MatrixXd::Identity(2, 2),
                                  Eigen::MatrixXd::Identity(2, 2));
  m.ntheta = 1;
  m.ftheta = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(2, 1);
  };
  auto lin = jacobians_fd(m, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  CHECK(lin.theta.A[0].norm() == 0.0);
  CHECK(lin.theta.B[0].norm() == 0.0);
}

TEST_CASE("satellite: analytic Jacobians match finite differences") {
  auto m = satellite_model(1.3, 0.8, 0.01);
  auto fd_only = m;
  fd_only.jac_bar = nullptr;
  fd_only.jac_theta = nullptr;
  std::mt19937 rng(22);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd x = testutil::random_vector(rng, 6);
    Eigen::VectorXd u = testutil::random_vector(rng, 2);
    auto an = jacobians_fd(m, x, u);
    auto fd = jacobians_fd(fd_only, x, u);
    CHECK((an.A - fd.A).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK((an.B - fd.B).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK((an.theta.A[0] - fd.theta.A[0]).lpNorm<Eigen::Infinity>() < 1e-5);
    CHECK((an.theta.B[0] - fd.theta.B[0]).lpNorm<Eigen::Infinity>() < 1e-5);
  }
}

TEST_CASE("satellite: rotation derivative appears in the velocity rows") {
  // Continuous relation d(a_x)/d(psi) = -v_y/m at psi = 0; the one-substep
  // discrete map reproduces it scaled by the substep length.
  Discretizer d;
  d.h = 0.5;
  d.substeps = 1;
  const double mass = 2.0;
  auto m = satellite_model(mass, 1.0, 0.01, d);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd u(2);
  u << 0.3, 0.7;
  auto lin = jacobians_fd(m, x, u);
  CHECK(lin.A(3, 2) == doctest::Approx(0.5 * (-u[1] / mass)).epsilon(1e-10));
  CHECK(lin.A(4, 2) == doctest::Approx(0.5 * (u[0] / mass)).epsilon(1e-10));
}

TEST_CASE("property: the discrete map is affine in theta") {
  auto m = satellite_model();
  std::mt19937 rng(23);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd x = testutil::random_vector(rng, 6);
    Eigen::VectorXd u = testutil::random_vector(rng, 2);
    Eigen::VectorXd t0 = Eigen::VectorXd::Constant(1, -0.01);
    Eigen::VectorXd t1 = Eigen::VectorXd::Constant(1, 0.01);
    Eigen::VectorXd tm = Eigen::VectorXd::Constant(1, 0.0);
    Eigen::VectorXd mid = 0.5 * (step(m, x, u, t0) + step(m, x, u, t1));
    CHECK((mid - step(m, x, u, tm)).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("property: Hessian oracle is symmetric and matches differences") {
  auto m = satellite_model();
  std::mt19937 rng(24);
  Eigen::VectorXd th = Eigen::VectorXd::Zero(1);
  for (int t = 0; t < 3; ++t) {
    Eigen::VectorXd x = testutil::random_vector(rng, 6);
    Eigen::VectorXd u = testutil::random_vector(rng, 2);
    for (int i = 0; i < 6; ++i) {
      Eigen::MatrixXd H = hessian(m, x, u, th, i);
      CHECK((H - H.transpose()).lpNorm<Eigen::Infinity>() < 1e-9);
      Eigen::MatrixXd Hfd = hessian_fd(m, x, u, th, i);
      CHECK((H - Hfd).lpNorm<Eigen::Infinity>() < 1e-5);
    }
  }
}

TEST_SUITE_END();
