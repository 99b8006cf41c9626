#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "rsls/errors.hpp"

namespace rsls {

struct UncertainModel;  // dynamics.hpp

// The set { E d : ||d||_inf <= 1 }. Support value along a row h equals
// the 1-norm of h^T E.
struct BoxImageSet {
  Eigen::MatrixXd E;

  int dim() const { return static_cast<int>(E.rows()); }
  int n_gen() const { return static_cast<int>(E.cols()); }
};

// Per-row support values: entry i = || rows.row(i) * E ||_1.
Eigen::VectorXd support_rowwise(const BoxImageSet& S, const Eigen::MatrixXd& rows);

// Axis-aligned box, lower <= x <= upper.
struct ParamBox {
  Eigen::VectorXd lower, upper;

  ParamBox() = default;
  ParamBox(Eigen::VectorXd lo, Eigen::VectorXd up);
  static ParamBox centered(const Eigen::VectorXd& halfwidth);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;
};

// H-rep polytope H x <= h, optionally with an explicit vertex list.
struct Polytope {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;
  std::optional<std::vector<Eigen::VectorXd>> vertex_list;

  int dim() const { return static_cast<int>(H.cols()); }
  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
};

// All vertices, duplicates removed. A degenerate box axis (lower == upper)
// does not double the count.
std::vector<Eigen::VectorXd> vertices(const ParamBox& box);

// Returns the stored vertex list; general H-rep enumeration is deliberately
// unsupported and throws UnsupportedRepresentation.
std::vector<Eigen::VectorXd> vertices(const Polytope& P);

Polytope as_polytope(const ParamBox& box);

// [min, max] of a 1-dimensional polytope; throws if empty or unbounded.
std::pair<double, double> interval_1d(const Polytope& P);

// Intersects the prior parameter polytope with the half-spaces consistent
// with the observed transitions: for each step k,
//   -H_w f_theta(x_k,u_k) * theta <= -H_w x_{k+1} + h_w + H_w fbar(x_k,u_k).
// W is given in H-rep (H_w d <= h_w).
Polytope set_membership_update(const Polytope& Theta,
                               const Eigen::MatrixXd& H_w,
                               const Eigen::VectorXd& h_w,
                               const UncertainModel& model,
                               const std::vector<Eigen::VectorXd>& xs,
                               const std::vector<Eigen::VectorXd>& us,
                               bool prune = false);

// H-rep of { E d : ||d||_inf <= 1 } for square invertible E:
// |E^{-1} w| <= 1 row-wise.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> box_image_hrep(const BoxImageSet& S);

}  // namespace rsls
