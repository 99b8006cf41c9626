#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "rsls/dynamics.hpp"

namespace rsls {

// Per-coordinate curvature constants: |remainder_i| <= mu_i * ||(dx,du)||_inf^2
// for linearizations anywhere in the sampled domain.
struct MuBound {
  Eigen::VectorXd mu;
  struct Meta {
    std::int64_t samples = 0;
    double safety = 1.0;
    std::uint64_t seed = 0;
    std::string domain;
  } meta;
};

// mu_i = safety * 1/2 * max over sampled (xi in C, theta in vertices(Theta),
// eps in the unit infinity-ball) of |eps^T H_i(xi, theta) eps|.
//
// The eps maximization combines sign-vertex coordinate ascent with uniform
// interior samples. Sampling is chunked and each chunk derives its RNG state
// from (seed, chunk index), so the result is deterministic for a given seed
// regardless of the number of worker threads.
MuBound estimate_mu(const UncertainModel& model, const ParamBox& C,
                    const ParamBox& Theta, std::int64_t n_samples,
                    double safety = 1.0, std::uint64_t seed = 0,
                    int n_threads = 1);

// Exact first-order Taylor residual of the full map at (z, v):
// f(x,u,theta) - [f(z,v,theta) + A(z,v,theta)(x-z) + B(z,v,theta)(u-v)].
Eigen::VectorXd remainder_eval(const UncertainModel& model,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& z, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& theta);

}  // namespace rsls
