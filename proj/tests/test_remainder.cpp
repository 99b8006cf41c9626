#include <doctest.h>

#include <random>

#include "rsls/remainder.hpp"
#include "test_util.hpp"

using namespace rsls;

namespace {

// f(x, u) = x^2, one state, one input; curvature constant is exactly 1.
UncertainModel square_model() {
  UncertainModel m;
  m.nx = 1;
  m.nu = 1;
  m.ntheta = 0;
  m.fbar = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, x[0] * x[0]);
  };
  m.ftheta = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(1, 0);
  };
  m.E = BoxImageSet{Eigen::MatrixXd::Zero(1, 1)};
  return m;
}

ParamBox unit_box(int n) { return ParamBox::centered(Eigen::VectorXd::Ones(n)); }

}  // namespace

TEST_SUITE_BEGIN("remainder");

TEST_CASE("estimate_mu: linear model has zero curvature") {
  std::mt19937 rng(31);
  auto m = testutil::linear_model(testutil::random_matrix(rng, 2, 2),
                                  testutil::random_matrix(rng, 2, 1));
  auto mu = estimate_mu(m, unit_box(3), m.Theta, 200, 1.0, 7);
  CHECK(mu.mu.lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("estimate_mu: scalar quadratic map gives mu = 1") {
  auto m = square_model();
  auto mu = estimate_mu(m, unit_box(2), ParamBox(Eigen::VectorXd(0), Eigen::VectorXd(0)),
                        100, 1.0, 7);
  // finite-difference Hessian: exact for quadratics up to rounding noise
  CHECK(mu.mu[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("estimate_mu: satellite defaults reproduce the frozen reference") {
  // Reference values computed by an independent finite-difference prototype
  // at m = l = 1, h = 0.5, 10 substeps over the unit state-input box.
  auto m = satellite_model();
  auto mu = estimate_mu(m, unit_box(8), m.Theta, 4000, 1.0, 1, 4);
  Eigen::VectorXd ref(6);
  ref << 0.285, 0.285, 0.0, 1.446, 1.429, 0.0;
  for (int i : {0, 1, 3, 4})
    CHECK(mu.mu[i] == doctest::Approx(ref[i]).epsilon(0.08));
  CHECK(mu.mu[2] == 0.0);
  CHECK(mu.mu[5] == 0.0);
}

TEST_CASE("estimate_mu: deterministic in the seed, regardless of threads") {
  auto m = satellite_model();
  auto a = estimate_mu(m, unit_box(8), m.Theta, 600, 1.0, 42, 1);
  auto b = estimate_mu(m, unit_box(8), m.Theta, 600, 1.0, 42, 3);
  CHECK((a.mu - b.mu).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("estimate_mu: domain monotonicity") {
  auto m = satellite_model();
  auto small = estimate_mu(m, ParamBox::centered(0.5 * Eigen::VectorXd::Ones(8)),
                           m.Theta, 1000, 1.0, 5);
  auto big = estimate_mu(m, unit_box(8), m.Theta, 1000, 1.0, 5);
  CHECK((big.mu - small.mu).minCoeff() >= -1e-12);
}

TEST_CASE("estimate_mu: rejects unbounded domains and small safety") {
  auto m = square_model();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -1.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Ones(2);
  hi[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(estimate_mu(m, ParamBox(lo, hi), m.Theta, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_mu(m, unit_box(2), m.Theta, 10, 0.5),
                  std::invalid_argument);
}

TEST_CASE("remainder_eval: zero at the expansion point and for linear maps") {
  auto m = satellite_model();
  Eigen::VectorXd z = Eigen::VectorXd::Random(6), v = Eigen::VectorXd::Random(2);
  Eigen::VectorXd th = Eigen::VectorXd::Constant(1, 0.01);
  CHECK(remainder_eval(m, z, v, z, v, th).lpNorm<Eigen::Infinity>() < 1e-12);

  std::mt19937 rng(32);
  auto lin = testutil::linear_model(testutil::random_matrix(rng, 2, 2),
                                    testutil::random_matrix(rng, 2, 2));
  Eigen::VectorXd r =
      remainder_eval(lin, Eigen::VectorXd::Random(2), Eigen::VectorXd::Random(2),
                     Eigen::VectorXd::Random(2), Eigen::VectorXd::Random(2),
                     Eigen::VectorXd(0));
  CHECK(r.lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("remainder_eval: scalar quadratic arithmetic") {
  auto m = square_model();
  Eigen::VectorXd r = remainder_eval(
      m, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Zero(1),
      Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), Eigen::VectorXd(0));
  CHECK(r[0] == doctest::Approx(0.09).epsilon(1e-9));
}

TEST_CASE("property: sampled remainders stay below the curvature bound") {
  auto m = satellite_model();
  auto mu = estimate_mu(m, unit_box(8), m.Theta, 4000, 1.1, 3, 4);
  std::mt19937 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ut(-0.01, 0.01);
  int violations = 0;
  for (int s = 0; s < 10000; ++s) {
    Eigen::VectorXd x(6), z(6), uu(2), vv(2);
    for (int i = 0; i < 6; ++i) {
      x[i] = u(rng);
      z[i] = u(rng);
    }
    for (int i = 0; i < 2; ++i) {
      uu[i] = u(rng);
      vv[i] = u(rng);
    }
    Eigen::VectorXd th = Eigen::VectorXd::Constant(1, ut(rng));
    Eigen::VectorXd r = remainder_eval(m, x, uu, z, vv, th);
    Eigen::VectorXd d(8);
    d << x - z, uu - vv;
    const double rad2 = std::pow(d.lpNorm<Eigen::Infinity>(), 2);
    for (int i = 0; i < 6; ++i)
      if (std::abs(r[i]) > mu.mu[i] * rad2 + 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_SUITE_END();
