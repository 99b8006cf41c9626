#include <doctest.h>

#include <random>

#include "rsls/ocp.hpp"
#include "test_util.hpp"

using namespace rsls;

namespace {

// A point on the equality manifold: nominal rollout plus a response pair
// propagated consistently through the linearized dynamics.
Eigen::VectorXd consistent_point(const Ocp& ocp, std::mt19937& rng) {
  const OcpLayout& L = ocp.layout;
  OcpPoint pt;
  pt.v.assign(static_cast<size_t>(L.T), Eigen::VectorXd());
  for (auto& vk : pt.v) vk = 0.2 * testutil::random_vector(rng, L.nu);
  pt.z = rollout_nominal(ocp.model, ocp.spec.xbar, pt.v);
  pt.resp.Phi_x = CausalOperator(L.T, L.nx, L.nx);
  pt.resp.Phi_u = testutil::random_causal(rng, L.T, L.nu, L.nx, 0.1);
  pt.resp.tau = Eigen::VectorXd::Zero(L.T);
  for (int k = 0; k < L.T; ++k)
    pt.resp.sigma.push_back(Eigen::VectorXd::Constant(L.nx, 0.01));
  for (int k = 0; k < L.T; ++k) {
    Linearization lin = jacobians_fd(ocp.model, pt.z[static_cast<size_t>(k)],
                                     pt.v[static_cast<size_t>(k)]);
    pt.resp.Phi_x.block(k, 0) =
        Eigen::MatrixXd(pt.resp.sigma[static_cast<size_t>(k)].asDiagonal());
    for (int j = 1; j <= k; ++j)
      pt.resp.Phi_x.block(k, j) =
          lin.A * pt.resp.Phi_x.block(k - 1, j - 1) +
          lin.B * pt.resp.Phi_u.block(k - 1, j - 1);
    pt.resp.tau[k] = tau_lhs(pt.resp, k) + 0.01;
  }
  Eigen::VectorXd beta = pack(L, pt);
  set_slacks_exact(ocp, beta);
  return beta;
}

}  // namespace

TEST_SUITE("ocp") {

TEST_CASE("satellite problem dimensions") {
  SUBCASE("robust") {
    Ocp ocp = assemble(testutil::satellite_spec(OcpMode::robust));
    const OcpLayout& L = ocp.layout;
    CHECK(L.off_phix == 86);                 // 6*11 states + 2*10 inputs
    CHECK(L.off_sigma - L.off_phix == 2640); // (6+2)*6*55 response entries
    CHECK(ocp.rows.n_filter == 120);         // 10 steps * 6 rows * 2 vertices
    CHECK(ocp.rows.n_tighten == 172);        // 10*16 stage + 12 terminal
    CHECK(ocp.rows.n_tau == 80);
    CHECK(ocp.rows.n_perf == 60);
    CHECK(ocp.nlp.m_eq == 2046);             // 6 + 60 dynamics + 1980 subspace
    CHECK(ocp.nlp.n == 6996);
    CHECK(ocp.nlp.m_in == 8832);
    CHECK(static_cast<int>(ocp.theta_vertices.size()) == 2);
  }
  SUBCASE("offline mode drops the parametric columns") {
    OcpSpec spec = testutil::satellite_spec(OcpMode::offline);
    spec.offline_fraction = 0.5;
    Ocp ocp = assemble(spec);
    CHECK(static_cast<int>(ocp.theta_vertices.size()) == 1);
    CHECK(ocp.theta_vertices[0].isZero(0.0));
    CHECK(ocp.rows.n_filter == 60);  // one vertex
    CHECK(ocp.model.E.n_gen() == satellite_model().E.n_gen() + 6);
  }
  SUBCASE("nominal mode has no response variables") {
    Ocp ocp = assemble(testutil::satellite_spec(OcpMode::nominal));
    CHECK(ocp.nlp.n == 86);
    CHECK(ocp.nlp.m_eq == 66);   // initial state + dynamics only
    CHECK(ocp.nlp.m_in == 172);  // plain stage/terminal rows
    CHECK(!ocp.layout.has_response());
  }
}

TEST_CASE("invalid specifications are rejected") {
  OcpSpec spec = testutil::satellite_spec();
  spec.Q = Eigen::MatrixXd::Identity(5, 5);
  CHECK_THROWS_AS(assemble(spec), DimensionError);
  spec = testutil::satellite_spec();
  spec.lambda = -1.0;
  CHECK_THROWS_AS(assemble(spec), DimensionError);
  spec = testutil::satellite_spec(OcpMode::offline);
  spec.offline_fraction = -0.1;
  CHECK_THROWS_AS(assemble(spec), DimensionError);
}

TEST_CASE("pack and unpack round-trip bitwise") {
  Ocp ocp = assemble(testutil::satellite_spec(OcpMode::robust, 4));
  std::mt19937 rng(2);
  Eigen::VectorXd beta = testutil::random_vector(rng, ocp.nlp.n, 2.0);
  OcpPoint pt = unpack(ocp.layout, beta);
  Eigen::VectorXd back = pack(ocp.layout, pt);
  // Slacks are not part of the point; compare everything before them.
  CHECK(beta.head(ocp.layout.off_slack) == back.head(ocp.layout.off_slack));
}

TEST_CASE("equality residuals vanish on the consistency manifold") {
  Ocp ocp = assemble(testutil::satellite_spec(OcpMode::robust, 4));
  std::mt19937 rng(7);
  Eigen::VectorXd beta = consistent_point(ocp, rng);
  CHECK(ocp.nlp.eval_eq(beta).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("jacobians match directional finite differences") {
  Ocp ocp = assemble(testutil::satellite_spec(OcpMode::robust, 3));
  SolverConfig cfg;
  Eigen::VectorXd beta = initial_guess(ocp, cfg).beta;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  for (int i = 0; i < beta.size(); ++i) beta[i] += u(rng);

  std::vector<Eigen::Triplet<double>> te, ti;
  ocp.nlp.jac_eq(beta, te);
  ocp.nlp.jac_in(beta, ti);
  Eigen::SparseMatrix<double> Je(ocp.nlp.m_eq, ocp.nlp.n),
      Ji(ocp.nlp.m_in, ocp.nlp.n);
  Je.setFromTriplets(te.begin(), te.end());
  Ji.setFromTriplets(ti.begin(), ti.end());

  const double eps = 1e-5;
  for (int t = 0; t < 4; ++t) {
    Eigen::VectorXd dir = testutil::random_vector(rng, ocp.nlp.n);
    dir.normalize();
    Eigen::VectorXd fd_e = (ocp.nlp.eval_eq(beta + eps * dir) -
                            ocp.nlp.eval_eq(beta - eps * dir)) /
                           (2 * eps);
    Eigen::VectorXd fd_i = (ocp.nlp.eval_in(beta + eps * dir) -
                            ocp.nlp.eval_in(beta - eps * dir)) /
                           (2 * eps);
    CHECK((Je * dir - fd_e).lpNorm<Eigen::Infinity>() <=
          1e-4 * (1.0 + fd_e.lpNorm<Eigen::Infinity>()));
    CHECK((Ji * dir - fd_i).lpNorm<Eigen::Infinity>() <=
          1e-4 * (1.0 + fd_i.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("epigraph rows reproduce the norm kernels") {
  for (OcpMode mode : {OcpMode::robust, OcpMode::offline}) {
    OcpSpec spec = testutil::satellite_spec(mode, 3);
    spec.offline_fraction = 0.4;
    Ocp ocp = assemble(spec);
    const OcpLayout& L = ocp.layout;
    std::mt19937 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd beta = consistent_point(ocp, rng);
      OcpPoint pt = unpack(L, beta);
      Eigen::VectorXd cin = ocp.nlp.eval_in(beta);

      int row = ocp.rows.off_filter;
      for (int k = 0; k < L.T; ++k) {
        Linearization lin =
            jacobians_fd(ocp.model, pt.z[static_cast<size_t>(k)],
                         pt.v[static_cast<size_t>(k)]);
        const Eigen::MatrixXd Fth = ocp.model.ftheta(
            pt.z[static_cast<size_t>(k)], pt.v[static_cast<size_t>(k)]);
        for (int i = 0; i < L.nx; ++i)
          for (const auto& th : ocp.theta_vertices) {
            const double kernel =
                filter_lhs(k, i, th, lin.theta, Fth, ocp.model.E,
                           spec.mu.mu, pt.resp) -
                pt.resp.sigma[static_cast<size_t>(k)][i];
            CHECK(std::abs(cin[row++] - kernel) <= 1e-12);
          }
      }
      for (int k = 0; k < L.T; ++k)
        for (const auto& sc : spec.constraints) {
          const double kernel =
              tighten_lhs(sc.c, sc.b, pt.z[static_cast<size_t>(k)],
                          pt.v[static_cast<size_t>(k)], pt.resp, k);
          CHECK(std::abs(cin[row++] - kernel) <= 1e-12);
        }
      for (const auto& tc : spec.terminal) {
        const double kernel =
            tighten_terminal_lhs(tc.c, tc.b, pt.z.back(), pt.resp);
        CHECK(std::abs(cin[row++] - kernel) <= 1e-12);
      }
      for (int k = 0; k < L.T; ++k) {
        double worst = -1e300;
        for (int r = 0; r < L.nx + L.nu; ++r)
          worst = std::max(worst, cin[row++]);
        CHECK(std::abs(worst + pt.resp.tau[k] - tau_lhs(pt.resp, k)) <= 1e-12);
      }
      double worst = -1e300;
      for (int r = 0; r < ocp.rows.n_perf; ++r)
        worst = std::max(worst, cin[row++]);
      CHECK(std::abs(worst + spec.performance->gamma -
                     perf_lhs(*spec.performance, pt.resp)) <= 1e-12);
      CHECK(row == ocp.nlp.m_in);
    }
  }
}

TEST_CASE("initial guess is feasible for a loose linear instance") {
  std::mt19937 rng(3);
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.8, 0.1, 0.0, 0.7;
  B << 0.0, 1.0;
  OcpSpec spec;
  spec.model = testutil::linear_model(A, B);
  spec.T = 4;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
    c[i] = 1.0;
    spec.constraints.push_back({c, -100.0});
    spec.constraints.push_back({-c, -100.0});
  }
  spec.mu.mu = Eigen::VectorXd::Zero(2);
  spec.Q = Eigen::MatrixXd::Identity(2, 2);
  spec.R = Eigen::MatrixXd::Identity(1, 1);
  spec.Qf = spec.Q;
  spec.xbar = (Eigen::VectorXd(2) << 1.0, -0.5).finished();
  Ocp ocp = assemble(spec);

  SolverConfig cfg;
  InitialGuess ig = initial_guess(ocp, cfg);
  REQUIRE(ig.nominal_report.status == SolveReport::Status::optimal);
  CHECK(ocp.nlp.eval_eq(ig.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(ocp.nlp.eval_in(ig.beta).maxCoeff() <= 1e-8);
}

TEST_CASE("nominal satellite solve reproduces the reference cost") {
  SolverConfig cfg;
  OcpSolution sol = solve_ocp(testutil::satellite_spec(OcpMode::nominal), cfg);
  REQUIRE(sol.report.status == SolveReport::Status::optimal);
  // Reference value frozen from an independent NLP solve of this instance.
  CHECK(sol.nominal_cost == doctest::Approx(17.2813).epsilon(2e-4));
  CHECK(sol.report.violation <= cfg.tol_feas);
}

TEST_CASE("small robust solve verifies and recovers gains") {
  SolverConfig cfg;
  OcpSpec spec = testutil::satellite_spec(OcpMode::robust, 3);
  OcpSolution sol = solve_ocp(spec, cfg);
  REQUIRE(sol.report.status == SolveReport::Status::optimal);
  CHECK(sol.check.worst() <= 1e-6);
  CHECK(sol.K.T() == 3);
  // The recovered gains reproduce Phi_u from Phi_x.
  CausalOperator prod = compose(sol.K, sol.point.resp.Phi_x);
  prod -= sol.point.resp.Phi_u;
  CHECK(prod.max_abs() <= 1e-8);
  // Robust cannot beat the nominal optimum of the same instance.
  OcpSolution nom =
      solve_ocp(testutil::satellite_spec(OcpMode::nominal, 3), cfg);
  CHECK(sol.nominal_cost >= nom.nominal_cost - 1e-6);
}

}  // TEST_SUITE
