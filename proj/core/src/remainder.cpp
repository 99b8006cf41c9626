#include "rsls/remainder.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace rsls {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// max over the sign vertices of |eps^T H eps|, by coordinate-flip ascent on
// both sign branches from a handful of deterministic and random starts.
double max_abs_quad_vertices(const Eigen::MatrixXd& H, std::mt19937_64& rng) {
  const int n = static_cast<int>(H.rows());
  double best = 0.0;
  std::uniform_int_distribution<int> coin(0, 1);
  for (int sgn = 0; sgn < 2; ++sgn) {
    const Eigen::MatrixXd M = sgn == 0 ? H : Eigen::MatrixXd(-H);
    for (int start = 0; start < 5; ++start) {
      Eigen::VectorXd v(n);
      if (start == 0)
        v.setOnes();
      else if (start == 1)
        for (int i = 0; i < n; ++i) v[i] = (i % 2 == 0) ? 1.0 : -1.0;
      else
        for (int i = 0; i < n; ++i) v[i] = coin(rng) ? 1.0 : -1.0;
      Eigen::VectorXd q = M * v;
      for (int sweep = 0; sweep < 32; ++sweep) {
        bool improved = false;
        for (int b = 0; b < n; ++b) {
          // Objective change from flipping coordinate b.
          const double delta = -4.0 * v[b] * q[b] + 4.0 * M(b, b);
          if (delta > 1e-14) {
            v[b] = -v[b];
            q += 2.0 * v[b] * M.col(b);
            improved = true;
          }
        }
        if (!improved) break;
      }
      best = std::max(best, v.dot(M * v));
    }
  }
  return best;
}

double max_abs_quad(const Eigen::MatrixXd& H, std::mt19937_64& rng) {
  double best = max_abs_quad_vertices(H, rng);
  // Interior guard: |q| can peak off-vertex when H is indefinite.
  const int n = static_cast<int>(H.rows());
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd e(n);
  for (int s = 0; s < 8; ++s) {
    for (int i = 0; i < n; ++i) e[i] = unif(rng);
    best = std::max(best, std::abs(e.dot(H * e)));
  }
  return best;
}

}  // namespace

MuBound estimate_mu(const UncertainModel& model, const ParamBox& C,
                    const ParamBox& Theta, std::int64_t n_samples,
                    double safety, std::uint64_t seed, int n_threads) {
  const int dim = model.nx + model.nu;
  require_dim(C.dim() == dim, "estimate_mu: domain box dimension");
  if (!C.lower.allFinite() || !C.upper.allFinite())
    throw std::invalid_argument("estimate_mu: unbounded sampling domain");
  if (n_samples < 1)
    throw std::invalid_argument("estimate_mu: n_samples >= 1 required");
  if (safety < 1.0)
    throw std::invalid_argument("estimate_mu: safety factor must be >= 1");

  std::vector<Eigen::VectorXd> thetas =
      model.ntheta > 0 ? vertices(Theta)
                       : std::vector<Eigen::VectorXd>{Eigen::VectorXd(0)};

  // Deterministic candidate list: all domain vertices (when enumerable)
  // followed by uniform samples, processed in fixed-size chunks whose RNG
  // state depends only on (seed, chunk).
  std::vector<Eigen::VectorXd> vert =
      dim <= 12 ? vertices(C) : std::vector<Eigen::VectorXd>{};
  const std::int64_t chunk_size = 256;
  const std::int64_t n_vert = static_cast<std::int64_t>(vert.size());
  const std::int64_t total = n_vert + n_samples;
  const std::int64_t n_chunks = (total + chunk_size - 1) / chunk_size;

  std::mutex merge_mutex;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(model.nx);
  std::atomic<std::int64_t> next_chunk{0};

  auto worker = [&]() {
    Eigen::VectorXd local = Eigen::VectorXd::Zero(model.nx);
    for (;;) {
      const std::int64_t c = next_chunk.fetch_add(1);
      if (c >= n_chunks) break;
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(c))));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const std::int64_t begin = c * chunk_size;
      const std::int64_t end = std::min(begin + chunk_size, total);
      Eigen::VectorXd xi(dim);
      for (std::int64_t t = begin; t < end; ++t) {
        if (t < n_vert) {
          xi = vert[static_cast<size_t>(t)];
        } else {
          for (int i = 0; i < dim; ++i)
            xi[i] = C.lower[i] + (C.upper[i] - C.lower[i]) * unif(rng);
        }
        const Eigen::VectorXd x = xi.head(model.nx);
        const Eigen::VectorXd u = xi.tail(model.nu);
        for (const auto& th : thetas) {
          for (int i = 0; i < model.nx; ++i) {
            const Eigen::MatrixXd H = hessian(model, x, u, th, i);
            local[i] = std::max(local[i], 0.5 * max_abs_quad(H, rng));
          }
        }
      }
    }
    std::lock_guard<std::mutex> lock(merge_mutex);
    mu = mu.cwiseMax(local);
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Snap finite-difference noise to zero so linear components report
  // exactly zero curvature (central differences of a linear map leave
  // O(1e-8) cancellation residue).
  for (int i = 0; i < mu.size(); ++i)
    if (mu[i] < 1e-7) mu[i] = 0.0;

  MuBound out;
  out.mu = safety * mu;
  out.meta.samples = total;
  out.meta.safety = safety;
  out.meta.seed = seed;
  out.meta.domain = "box";
  return out;
}

Eigen::VectorXd remainder_eval(const UncertainModel& model,
                               const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& z, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& theta) {
  Linearization lin = jacobians_fd(model, z, v);
  Eigen::MatrixXd A = lin.A, B = lin.B;
  for (int p = 0; p < model.ntheta; ++p) {
    A += lin.theta.A[p] * theta[p];
    B += lin.theta.B[p] * theta[p];
  }
  return step(model, x, u, theta) - step(model, z, v, theta) - A * (x - z) -
         B * (u - v);
}

}  // namespace rsls
