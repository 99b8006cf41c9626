#include <cmath>

#include "rsls/dynamics.hpp"

namespace rsls {

namespace {

struct SatParams {
  double m, l, h;
  int sub;
};

Eigen::VectorXd fc(const SatParams& p, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& u) {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  Eigen::VectorXd f(6);
  f << x[3], x[4], x[5], (c * u[0] - s * u[1]) / p.m,
      (s * u[0] + c * u[1]) / p.m, p.l * u[0];
  return f;
}

void fc_jacobians(const SatParams& p, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u, Eigen::MatrixXd& Fx,
                  Eigen::MatrixXd& Fu) {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  Fx = Eigen::MatrixXd::Zero(6, 6);
  Fu = Eigen::MatrixXd::Zero(6, 2);
  Fx(0, 3) = Fx(1, 4) = Fx(2, 5) = 1.0;
  Fx(3, 2) = (-s * u[0] - c * u[1]) / p.m;
  Fx(4, 2) = (c * u[0] - s * u[1]) / p.m;
  Fu(3, 0) = c / p.m;
  Fu(3, 1) = -s / p.m;
  Fu(4, 0) = s / p.m;
  Fu(4, 1) = c / p.m;
  Fu(5, 0) = p.l;
}

Eigen::VectorXd sat_fbar(const SatParams& p, const Eigen::VectorXd& x0,
                         const Eigen::VectorXd& u) {
  const double hp = p.h / p.sub;
  Eigen::VectorXd x = x0;
  for (int t = 0; t < p.sub; ++t) x += hp * fc(p, x, u);
  return x;
}

void sat_jac(const SatParams& p, const Eigen::VectorXd& x0,
             const Eigen::VectorXd& u, Eigen::MatrixXd& A, Eigen::MatrixXd& B) {
  const double hp = p.h / p.sub;
  A = Eigen::MatrixXd::Identity(6, 6);
  B = Eigen::MatrixXd::Zero(6, 2);
  Eigen::VectorXd x = x0;
  Eigen::MatrixXd Fx, Fu;
  for (int t = 0; t < p.sub; ++t) {
    fc_jacobians(p, x, u, Fx, Fu);
    B += hp * (Fx * B + Fu);
    A += hp * (Fx * A);
    x += hp * fc(p, x, u);
  }
}

// Hessians of every component of the Euler composition with respect to the
// combined (x, u) point, propagated through the substeps along with the
// first derivatives.
std::vector<Eigen::MatrixXd> sat_hessians(const SatParams& p,
                                          const Eigen::VectorXd& x0,
                                          const Eigen::VectorXd& u) {
  const double hp = p.h / p.sub;
  std::vector<Eigen::MatrixXd> G(6, Eigen::MatrixXd::Zero(8, 8));
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(6, 6);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(6, 2);
  Eigen::VectorXd x = x0;
  Eigen::MatrixXd Fx, Fu;
  Eigen::MatrixXd D(8, 8);
  for (int t = 0; t < p.sub; ++t) {
    fc_jacobians(p, x, u, Fx, Fu);
    D.setZero();
    D.topLeftCorner(6, 6) = A;
    D.topRightCorner(6, 2) = B;
    D(6, 6) = D(7, 7) = 1.0;

    const double c = std::cos(x[2]), s = std::sin(x[2]);
    // Curvature of the two translational accelerations in (psi, u0, u1).
    Eigen::MatrixXd H3 = Eigen::MatrixXd::Zero(8, 8);
    Eigen::MatrixXd H4 = Eigen::MatrixXd::Zero(8, 8);
    H3(2, 2) = (-c * u[0] + s * u[1]) / p.m;
    H3(2, 6) = H3(6, 2) = -s / p.m;
    H3(2, 7) = H3(7, 2) = -c / p.m;
    H4(2, 2) = (-s * u[0] - c * u[1]) / p.m;
    H4(2, 6) = H4(6, 2) = c / p.m;
    H4(2, 7) = H4(7, 2) = -s / p.m;

    std::vector<Eigen::MatrixXd> Gn(6);
    for (int i = 0; i < 6; ++i) {
      Gn[i] = G[i];
      for (int a = 0; a < 6; ++a)
        if (Fx(i, a) != 0.0) Gn[i] += hp * Fx(i, a) * G[a];
    }
    Gn[3] += hp * (D.transpose() * H3 * D);
    Gn[4] += hp * (D.transpose() * H4 * D);
    G = std::move(Gn);

    B += hp * (Fx * B + Fu);
    A += hp * (Fx * A);
    x += hp * fc(p, x, u);
  }
  return G;
}

}  // namespace

UncertainModel satellite_model(double m_mass, double l_arm, double delta_bound,
                               const Discretizer& disc) {
  if (m_mass <= 0.0) throw std::invalid_argument("satellite_model: mass must be positive");
  if (disc.substeps < 1) throw std::invalid_argument("satellite_model: substeps >= 1");
  const SatParams p{m_mass, l_arm, disc.h, disc.substeps};

  UncertainModel model;
  model.nx = 6;
  model.nu = 2;
  model.ntheta = 1;
  model.fbar = [p](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return sat_fbar(p, x, u);
  };
  model.ftheta = [p](const Eigen::VectorXd&, const Eigen::VectorXd& u) {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(6, 1);
    F(5, 0) = p.h * p.l * u[0];
    return F;
  };
  model.jac_bar = [p](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      Eigen::MatrixXd& A, Eigen::MatrixXd& B) {
    sat_jac(p, x, u, A, B);
  };
  model.jac_theta = [p](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    ParamJacobians J;
    J.A = {Eigen::MatrixXd::Zero(6, 6)};
    J.B = {Eigen::MatrixXd::Zero(6, 2)};
    J.B[0](5, 0) = p.h * p.l;
    return J;
  };
  // f_theta is linear in (x, u), so the full-map Hessian does not depend
  // on theta.
  model.hessian = [p](const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      const Eigen::VectorXd&, int i) {
    return sat_hessians(p, x, u)[static_cast<size_t>(i)];
  };

  model.E = BoxImageSet{[] {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(6, 3);
    E.bottomRows(3) = 1e-3 * Eigen::MatrixXd::Identity(3, 3);
    return E;
  }()};
  model.Theta = ParamBox::centered(Eigen::VectorXd::Constant(1, delta_bound));
  return model;
}

}  // namespace rsls
