#include "rsls/sets.hpp"

#include <cmath>

#include "rsls/dynamics.hpp"

namespace rsls {

Eigen::VectorXd support_rowwise(const BoxImageSet& S, const Eigen::MatrixXd& rows) {
  require_dim(rows.cols() == S.E.rows(),
              "support_rowwise: row width vs disturbance dimension");
  return (rows * S.E).cwiseAbs().rowwise().sum();
}

ParamBox::ParamBox(Eigen::VectorXd lo, Eigen::VectorXd up)
    : lower(std::move(lo)), upper(std::move(up)) {
  require_dim(lower.size() == upper.size(), "ParamBox bounds length");
  if ((lower.array() > upper.array()).any())
    throw std::invalid_argument("ParamBox: lower exceeds upper");
}

ParamBox ParamBox::centered(const Eigen::VectorXd& halfwidth) {
  return ParamBox(-halfwidth, halfwidth);
}

bool ParamBox::contains(const Eigen::VectorXd& x, double tol) const {
  require_dim(x.size() == lower.size(), "ParamBox::contains point length");
  return (x.array() >= lower.array() - tol).all() &&
         (x.array() <= upper.array() + tol).all();
}

bool Polytope::contains(const Eigen::VectorXd& x, double tol) const {
  require_dim(x.size() == H.cols(), "Polytope::contains point length");
  return ((H * x - h).array() <= tol).all();
}

std::vector<Eigen::VectorXd> vertices(const ParamBox& box) {
  const int n = box.dim();
  std::vector<int> free_axes;
  for (int i = 0; i < n; ++i)
    if (box.upper[i] > box.lower[i]) free_axes.push_back(i);
  if (free_axes.size() > 30)
    throw std::invalid_argument("vertices: box dimension too large to enumerate");
  std::vector<Eigen::VectorXd> out;
  const size_t count = size_t{1} << free_axes.size();
  out.reserve(count);
  for (size_t mask = 0; mask < count; ++mask) {
    Eigen::VectorXd v = box.lower;
    for (size_t a = 0; a < free_axes.size(); ++a)
      if (mask & (size_t{1} << a)) v[free_axes[a]] = box.upper[free_axes[a]];
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Eigen::VectorXd> vertices(const Polytope& P) {
  if (!P.vertex_list)
    throw UnsupportedRepresentation(
        "vertices: H-rep polytope without an explicit vertex list");
  return *P.vertex_list;
}

Polytope as_polytope(const ParamBox& box) {
  const int n = box.dim();
  Polytope P;
  P.H.resize(2 * n, n);
  P.h.resize(2 * n);
  P.H << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
  P.h << box.upper, -box.lower;
  P.vertex_list = vertices(box);
  return P;
}

std::pair<double, double> interval_1d(const Polytope& P) {
  require_dim(P.dim() == 1, "interval_1d: polytope dimension");
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int r = 0; r < P.H.rows(); ++r) {
    const double a = P.H(r, 0), b = P.h[r];
    if (a > 0)
      hi = std::min(hi, b / a);
    else if (a < 0)
      lo = std::max(lo, b / a);
    else if (b < 0)
      throw NumericalError("interval_1d: empty polytope (0 <= negative)");
  }
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw NumericalError("interval_1d: unbounded polytope");
  if (lo > hi) throw NumericalError("interval_1d: empty polytope");
  return {lo, hi};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> box_image_hrep(const BoxImageSet& S) {
  require_dim(S.E.rows() == S.E.cols(), "box_image_hrep: E must be square");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S.E);
  if (!lu.isInvertible())
    throw NumericalError("box_image_hrep: E is singular");
  const Eigen::MatrixXd Einv = lu.inverse();
  const int n = S.dim();
  Eigen::MatrixXd H(2 * n, n);
  H << Einv, -Einv;
  return {H, Eigen::VectorXd::Ones(2 * n)};
}

Polytope set_membership_update(const Polytope& Theta,
                               const Eigen::MatrixXd& H_w,
                               const Eigen::VectorXd& h_w,
                               const UncertainModel& model,
                               const std::vector<Eigen::VectorXd>& xs,
                               const std::vector<Eigen::VectorXd>& us,
                               bool prune) {
  if (xs.size() < 2 || us.size() + 1 != xs.size())
    throw std::invalid_argument(
        "set_membership_update: need xs of length >= 2 and us one shorter");
  require_dim(H_w.cols() == model.nx, "set_membership_update: H_w width");
  require_dim(Theta.dim() == model.ntheta, "set_membership_update: Theta dim");

  const int steps = static_cast<int>(us.size());
  const int mw = static_cast<int>(H_w.rows());
  Eigen::MatrixXd H(Theta.H.rows() + steps * mw, model.ntheta);
  Eigen::VectorXd h(H.rows());
  H.topRows(Theta.H.rows()) = Theta.H;
  h.head(Theta.h.size()) = Theta.h;
  for (int k = 0; k < steps; ++k) {
    const Eigen::MatrixXd Ft = model.ftheta(xs[k], us[k]);
    const Eigen::VectorXd fb = model.fbar(xs[k], us[k]);
    H.middleRows(Theta.H.rows() + k * mw, mw) = -H_w * Ft;
    h.segment(Theta.h.size() + k * mw, mw) = -H_w * xs[k + 1] + h_w + H_w * fb;
  }

  Polytope out;
  out.H = H;
  out.h = h;

  if (model.ntheta == 1) {
    // Feasibility check (and cheap pruning) via the interval form.
    auto [lo, hi] = interval_1d(out);  // throws if empty => model falsified
    if (prune) {
      out.H.resize(2, 1);
      out.h.resize(2);
      out.H << 1.0, -1.0;
      out.h << hi, -lo;
    }
    out.vertex_list = {Eigen::VectorXd::Constant(1, lo),
                       Eigen::VectorXd::Constant(1, hi)};
  }
  return out;
}

}  // namespace rsls
