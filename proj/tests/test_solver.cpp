#include <doctest.h>

#include <Eigen/Dense>
#include <limits>

#include "rsls/solver.hpp"

using namespace rsls;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

NlpProblem base_problem(int n) {
  NlpProblem p;
  p.n = n;
  p.lb = Eigen::VectorXd::Constant(n, -kInf);
  p.ub = Eigen::VectorXd::Constant(n, kInf);
  p.H0 = Eigen::SparseMatrix<double>(n, n);
  p.g0 = Eigen::VectorXd::Zero(n);
  return p;
}

void set_quadratic(NlpProblem& p, const Eigen::MatrixXd& H,
                   const Eigen::VectorXd& g) {
  p.H0 = H.sparseView();
  p.g0 = g;
}

void set_linear_in(NlpProblem& p, const Eigen::MatrixXd& G,
                   const Eigen::VectorXd& h, bool elastic_rows) {
  p.m_in = static_cast<int>(G.rows());
  p.eval_in = [G, h](const Eigen::VectorXd& b) {
    return Eigen::VectorXd(G * b - h);
  };
  p.jac_in = [G](const Eigen::VectorXd&,
                 std::vector<Eigen::Triplet<double>>& t) {
    for (int i = 0; i < G.rows(); ++i)
      for (int j = 0; j < G.cols(); ++j)
        t.emplace_back(i, j, G(i, j));
  };
  p.elastic.assign(static_cast<size_t>(p.m_in),
                   elastic_rows ? std::uint8_t{1} : std::uint8_t{0});
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("linearly constrained quadratic recovers known optimum") {
  // min (b1-1)^2 + (b2-2.5)^2 over the same polygon as the QP test;
  // optimum (1.4, 1.7).
  NlpProblem p = base_problem(2);
  set_quadratic(p, 2.0 * Eigen::MatrixXd::Identity(2, 2),
                (Eigen::VectorXd(2) << -2.0, -5.0).finished());
  Eigen::MatrixXd G(5, 2);
  G << -1, 2, 1, 2, 1, -2, -1, 0, 0, -1;
  Eigen::VectorXd h(5);
  h << 2, 6, 2, 0, 0;
  set_linear_in(p, G, h, true);

  SolverConfig cfg;
  auto [beta, rep] = solve(p, cfg, Eigen::VectorXd::Zero(2));
  REQUIRE(rep.status == SolveReport::Status::optimal);
  CHECK(beta[0] == doctest::Approx(1.4).epsilon(1e-6));
  CHECK(beta[1] == doctest::Approx(1.7).epsilon(1e-6));
  // Reported objective is the raw quadratic (offset by the constant 1+2.5^2).
  CHECK(rep.objective == doctest::Approx(1.4 * 1.4 + 1.7 * 1.7 - 2.0 * 1.4 -
                                         5.0 * 1.7)
                             .epsilon(1e-8));
}

TEST_CASE("nonlinear equality constraint") {
  // min b1^2 + b2^2 subject to b1*b2 = 1; optimum at (1,1) or (-1,-1).
  NlpProblem p = base_problem(2);
  set_quadratic(p, 2.0 * Eigen::MatrixXd::Identity(2, 2),
                Eigen::VectorXd::Zero(2));
  p.m_eq = 1;
  p.eval_eq = [](const Eigen::VectorXd& b) {
    Eigen::VectorXd c(1);
    c << b[0] * b[1] - 1.0;
    return c;
  };
  p.jac_eq = [](const Eigen::VectorXd& b,
                std::vector<Eigen::Triplet<double>>& t) {
    t.emplace_back(0, 0, b[1]);
    t.emplace_back(0, 1, b[0]);
  };

  SolverConfig cfg;
  auto [beta, rep] = solve(p, cfg, (Eigen::VectorXd(2) << 2.0, 0.3).finished());
  REQUIRE(rep.status == SolveReport::Status::optimal);
  CHECK(beta[0] * beta[1] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(rep.objective == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(rep.violation <= cfg.tol_feas);
}

TEST_CASE("variable bounds clamp the iterates") {
  // min (b-3)^2 with b <= 1: optimum at the bound.
  NlpProblem p = base_problem(1);
  set_quadratic(p, 2.0 * Eigen::MatrixXd::Identity(1, 1),
                (Eigen::VectorXd(1) << -6.0).finished());
  p.ub[0] = 1.0;

  SolverConfig cfg;
  auto [beta, rep] = solve(p, cfg, (Eigen::VectorXd(1) << 10.0).finished());
  REQUIRE(rep.status == SolveReport::Status::optimal);
  CHECK(beta[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("inconsistent constraints reported infeasible") {
  // b <= -1 and b >= 1 cannot hold together.
  NlpProblem p = base_problem(1);
  set_quadratic(p, 2.0 * Eigen::MatrixXd::Identity(1, 1),
                Eigen::VectorXd::Zero(1));
  Eigen::MatrixXd G(2, 1);
  G << 1.0, -1.0;
  Eigen::VectorXd h(2);
  h << -1.0, -1.0;
  set_linear_in(p, G, h, true);

  SolverConfig cfg;
  cfg.rho_max = 1e6;
  cfg.stall_limit = 8;
  auto [beta, rep] = solve(p, cfg, Eigen::VectorXd::Zero(1));
  CHECK(rep.status == SolveReport::Status::infeasible);
  CHECK(rep.violation > cfg.tol_feas);
}

TEST_CASE("infeasible equality against a fixed variable") {
  // b pinned to 0 by bounds, equality wants b = 1.
  NlpProblem p = base_problem(1);
  set_quadratic(p, 2.0 * Eigen::MatrixXd::Identity(1, 1),
                Eigen::VectorXd::Zero(1));
  p.lb[0] = 0.0;
  p.ub[0] = 0.0;
  p.m_eq = 1;
  p.eval_eq = [](const Eigen::VectorXd& b) {
    Eigen::VectorXd c(1);
    c << b[0] - 1.0;
    return c;
  };
  p.jac_eq = [](const Eigen::VectorXd&,
                std::vector<Eigen::Triplet<double>>& t) {
    t.emplace_back(0, 0, 1.0);
  };

  SolverConfig cfg;
  cfg.rho_max = 1e6;
  cfg.stall_limit = 8;
  auto [beta, rep] = solve(p, cfg, Eigen::VectorXd::Zero(1));
  CHECK(rep.status == SolveReport::Status::infeasible);
}

TEST_CASE("deterministic across repeated solves") {
  NlpProblem p = base_problem(2);
  set_quadratic(p, 2.0 * Eigen::MatrixXd::Identity(2, 2),
                (Eigen::VectorXd(2) << -2.0, -5.0).finished());
  Eigen::MatrixXd G(5, 2);
  G << -1, 2, 1, 2, 1, -2, -1, 0, 0, -1;
  Eigen::VectorXd h(5);
  h << 2, 6, 2, 0, 0;
  set_linear_in(p, G, h, true);

  SolverConfig cfg;
  auto [b1, r1] = solve(p, cfg, Eigen::VectorXd::Zero(2));
  auto [b2, r2] = solve(p, cfg, Eigen::VectorXd::Zero(2));
  REQUIRE(r1.status == SolveReport::Status::optimal);
  CHECK(b1 == b2);
  CHECK(r1.iterations == r2.iterations);
  CHECK(r1.objective == r2.objective);
}

TEST_CASE("status strings") {
  CHECK(std::string(to_string(SolveReport::Status::optimal)) == "optimal");
  CHECK(std::string(to_string(SolveReport::Status::infeasible)) ==
        "infeasible");
  CHECK(std::string(to_string(SolveReport::Status::max_iter)) == "max_iter");
  CHECK(std::string(to_string(SolveReport::Status::numerical)) == "numerical");
}

}  // TEST_SUITE
