#include "rsls/dynamics.hpp"

#include <cmath>
#include <string>

namespace rsls {

Eigen::VectorXd step(const UncertainModel& model, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& theta) {
  require_dim(x.size() == model.nx, "step: state length");
  require_dim(u.size() == model.nu, "step: input length");
  require_dim(theta.size() == model.ntheta, "step: parameter length");
  Eigen::VectorXd out = model.fbar(x, u);
  if (model.ntheta > 0) out += model.ftheta(x, u) * theta;
  return out;
}

std::vector<Eigen::VectorXd> rollout_nominal(
    const UncertainModel& model, const Eigen::VectorXd& xbar,
    const std::vector<Eigen::VectorXd>& v_seq) {
  require_dim(xbar.size() == model.nx, "rollout_nominal: initial state length");
  std::vector<Eigen::VectorXd> z;
  z.reserve(v_seq.size() + 1);
  z.push_back(xbar);
  for (size_t k = 0; k < v_seq.size(); ++k) {
    z.push_back(model.fbar(z.back(), v_seq[k]));
    if (!z.back().allFinite())
      throw NumericalError("rollout_nominal: non-finite state at step " +
                           std::to_string(k + 1));
  }
  return z;
}

namespace {

double fd_step(double coord) { return 1e-6 * std::max(1.0, std::abs(coord)); }

// Central-difference Jacobian of g at (x, u), split into state/input parts.
template <typename F>
void fd_jacobian(const F& g, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 Eigen::MatrixXd& Jx, Eigen::MatrixXd& Ju) {
  const Eigen::VectorXd g0 = g(x, u);
  const int m = static_cast<int>(g0.size());
  Jx.resize(m, x.size());
  Ju.resize(m, u.size());
  Eigen::VectorXd xp = x, xm = x, up = u, um = u;
  for (int i = 0; i < x.size(); ++i) {
    const double e = fd_step(x[i]);
    xp[i] = x[i] + e;
    xm[i] = x[i] - e;
    Jx.col(i) = (g(xp, u) - g(xm, u)) / (2 * e);
    xp[i] = xm[i] = x[i];
  }
  for (int i = 0; i < u.size(); ++i) {
    const double e = fd_step(u[i]);
    up[i] = u[i] + e;
    um[i] = u[i] - e;
    Ju.col(i) = (g(x, up) - g(x, um)) / (2 * e);
    up[i] = um[i] = u[i];
  }
}

}  // namespace

Linearization jacobians_fd(const UncertainModel& model,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& v) {
  require_dim(z.size() == model.nx && v.size() == model.nu,
              "jacobians_fd: point dimensions");
  if (!z.allFinite() || !v.allFinite())
    throw NumericalError("jacobians_fd: non-finite linearization point");
  Linearization lin;
  if (model.jac_bar) {
    model.jac_bar(z, v, lin.A, lin.B);
  } else {
    fd_jacobian(model.fbar, z, v, lin.A, lin.B);
  }
  if (model.ntheta == 0) return lin;
  if (model.jac_theta) {
    lin.theta = model.jac_theta(z, v);
  } else {
    lin.theta.A.resize(model.ntheta);
    lin.theta.B.resize(model.ntheta);
    for (int p = 0; p < model.ntheta; ++p) {
      auto col = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        return Eigen::VectorXd(model.ftheta(x, u).col(p));
      };
      fd_jacobian(col, z, v, lin.theta.A[p], lin.theta.B[p]);
    }
  }
  return lin;
}

Eigen::MatrixXd hessian_fd(const UncertainModel& model, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& u, const Eigen::VectorXd& theta,
                           int i) {
  const int n = model.nx + model.nu;
  Eigen::VectorXd base(n);
  base << x, u;
  auto f_i = [&](const Eigen::VectorXd& p) {
    return step(model, p.head(model.nx), p.tail(model.nu), theta)[i];
  };
  Eigen::MatrixXd H(n, n);
  const double e = 1e-4;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      Eigen::VectorXd pp = base, pm = base, mp = base, mm = base;
      pp[a] += e; pp[b] += e;
      pm[a] += e; pm[b] -= e;
      mp[a] -= e; mp[b] += e;
      mm[a] -= e; mm[b] -= e;
      H(a, b) = H(b, a) =
          (f_i(pp) - f_i(pm) - f_i(mp) + f_i(mm)) / (4 * e * e);
    }
  }
  return H;
}

Eigen::MatrixXd hessian(const UncertainModel& model, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& theta,
                        int i) {
  if (model.hessian) return model.hessian(x, u, theta, i);
  return hessian_fd(model, x, u, theta, i);
}

}  // namespace rsls
