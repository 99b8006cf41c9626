#include "rsls/simulate.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace rsls {

namespace {

constexpr double kTol = 1e-9;

void check_admissible(const UncertainModel& model,
                      const Eigen::VectorXd& theta,
                      const std::vector<Eigen::VectorXd>& w_seq) {
  if (!model.Theta.contains(theta, kTol))
    throw std::invalid_argument("rollout: theta outside the parameter box");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(model.E.E);
  for (size_t k = 0; k < w_seq.size(); ++k) {
    const Eigen::VectorXd& wk = w_seq[k];
    const Eigen::VectorXd d = cod.solve(wk);
    const double residual = (model.E.E * d - wk).lpNorm<Eigen::Infinity>();
    if (residual > 1e-7 * std::max(1.0, wk.lpNorm<Eigen::Infinity>()) ||
        (d.size() > 0 && d.lpNorm<Eigen::Infinity>() > 1.0 + kTol) ||
        (d.size() == 0 && wk.lpNorm<Eigen::Infinity>() > kTol))
      throw std::invalid_argument(
          "rollout: disturbance at step " + std::to_string(k) +
          " has no unit-box preimage under the generator matrix");
  }
}

}  // namespace

RolloutResult closed_loop_rollout(const UncertainModel& model,
                                  const OcpSpec& spec, const SlsSolution& sol,
                                  const Eigen::VectorXd& theta,
                                  const std::vector<Eigen::VectorXd>& w_seq,
                                  bool force) {
  const int T = spec.T;
  require_dim(static_cast<int>(sol.z.size()) == T + 1 &&
                  static_cast<int>(sol.v.size()) == T,
              "rollout: solution horizon");
  require_dim(static_cast<int>(w_seq.size()) == T,
              "rollout: disturbance sequence length");
  require_dim(theta.size() == model.ntheta, "rollout: theta size");
  if (!force) check_admissible(model, theta, w_seq);
  const bool feedback = sol.K.T() == T;

  RolloutResult out;
  out.theta = theta;
  out.w = w_seq;
  out.x.push_back(spec.xbar);
  for (int k = 0; k < T; ++k) {
    Eigen::VectorXd uk = sol.v[static_cast<size_t>(k)];
    if (feedback)
      for (int j = 0; j < k; ++j)
        uk += sol.K.block(k - 1, j) *
              (out.x[static_cast<size_t>(k - j)] -
               sol.z[static_cast<size_t>(k - j)]);
    out.u.push_back(uk);
    Eigen::VectorXd next =
        step(model, out.x.back(), uk, theta) + w_seq[static_cast<size_t>(k)];
    if (!next.allFinite())
      throw NumericalError("rollout: non-finite state at step " +
                           std::to_string(k + 1));
    out.x.push_back(next);
  }

  out.max_constraint = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < T; ++k) {
    Eigen::VectorXd xu(model.nx + model.nu);
    xu << out.x[static_cast<size_t>(k)], out.u[static_cast<size_t>(k)];
    Eigen::VectorXd vals(spec.constraints.size());
    for (size_t i = 0; i < spec.constraints.size(); ++i)
      vals[static_cast<int>(i)] =
          spec.constraints[i].c.dot(xu) + spec.constraints[i].b;
    out.stage_values.push_back(vals);
  }
  out.terminal_values.resize(static_cast<int>(spec.terminal.size()));
  for (size_t i = 0; i < spec.terminal.size(); ++i)
    out.terminal_values[static_cast<int>(i)] =
        spec.terminal[i].c.dot(out.x.back()) + spec.terminal[i].b;
  for (const auto& vals : out.stage_values)
    for (int i = 0; i < vals.size(); ++i) {
      out.max_constraint = std::max(out.max_constraint, vals[i]);
      if (vals[i] > kTol) ++out.violations;
    }
  for (int i = 0; i < out.terminal_values.size(); ++i) {
    out.max_constraint = std::max(out.max_constraint, out.terminal_values[i]);
    if (out.terminal_values[i] > kTol) ++out.violations;
  }

  Tube tube = tubes(sol.z, sol.v, sol.resp);
  for (int k = 0; k <= T; ++k) {
    const Eigen::ArrayXd err =
        (out.x[static_cast<size_t>(k)] - sol.z[static_cast<size_t>(k)])
            .cwiseAbs()
            .array();
    const Eigen::ArrayXd hw = tube.x_halfwidth[static_cast<size_t>(k)].array();
    out.x_inside.push_back(err <= hw + kTol);
    out.max_tube_exceedance =
        std::max(out.max_tube_exceedance, (err - hw).maxCoeff());
  }
  for (int k = 0; k < T; ++k) {
    const Eigen::ArrayXd err =
        (out.u[static_cast<size_t>(k)] - sol.v[static_cast<size_t>(k)])
            .cwiseAbs()
            .array();
    const Eigen::ArrayXd hw = tube.u_halfwidth[static_cast<size_t>(k)].array();
    out.u_inside.push_back(err <= hw + kTol);
    out.max_tube_exceedance =
        std::max(out.max_tube_exceedance, (err - hw).maxCoeff());
  }
  return out;
}

McSummary monte_carlo_verify(const UncertainModel& model, const OcpSpec& spec,
                             const SlsSolution& sol, int n_runs,
                             unsigned seed) {
  McSummary s;
  if (n_runs <= 0) return s;
  s.step_margin.assign(static_cast<size_t>(spec.T) + 1,
                       -std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (int run = 0; run < n_runs; ++run) {
    std::seed_seq sq{seed, static_cast<unsigned>(run)};
    std::mt19937 rng(sq);

    Eigen::VectorXd theta(model.ntheta);
    const bool vertex = coin(rng);
    for (int i = 0; i < model.ntheta; ++i) {
      const double lo = model.Theta.lower[i], up = model.Theta.upper[i];
      theta[i] = vertex ? (coin(rng) ? up : lo)
                        : lo + (up - lo) * 0.5 * (unit(rng) + 1.0);
    }
    std::vector<Eigen::VectorXd> w;
    for (int k = 0; k < spec.T; ++k) {
      Eigen::VectorXd d(model.E.n_gen());
      for (int i = 0; i < d.size(); ++i) d[i] = unit(rng);
      w.push_back(model.E.E * d);
    }

    RolloutResult r = closed_loop_rollout(model, spec, sol, theta, w, true);
    ++s.n_runs;
    if (r.violations > 0) {
      ++s.violations;
      s.max_violation = std::max(s.max_violation, r.max_constraint);
    }
    if (!r.inside_tube()) ++s.tube_exits;
    s.max_tube_exceedance =
        std::max(s.max_tube_exceedance, std::max(0.0, r.max_tube_exceedance));
    for (int k = 0; k < spec.T; ++k)
      if (r.stage_values[static_cast<size_t>(k)].size() > 0)
        s.step_margin[static_cast<size_t>(k)] =
            std::max(s.step_margin[static_cast<size_t>(k)],
                     r.stage_values[static_cast<size_t>(k)].maxCoeff());
    if (r.terminal_values.size() > 0)
      s.step_margin.back() =
          std::max(s.step_margin.back(), r.terminal_values.maxCoeff());
  }
  return s;
}

AdversarialResult adversarial_search(const UncertainModel& model,
                                     const OcpSpec& spec,
                                     const SlsSolution& sol, int max_sweeps) {
  const int q = model.E.n_gen();
  const double ninf = -std::numeric_limits<double>::infinity();
  // Primary objective: peak constraint value. Secondary tie-breaker: sum of
  // per-step maxima, which keeps the ascent moving when the current peak sits
  // on a row the disturbance cannot influence (e.g. a saturated first input).
  struct Score {
    double peak, spread;
    bool beats(const Score& o) const {
      if (peak > o.peak + 1e-14) return true;
      return peak > o.peak - 1e-14 && spread > o.spread + 1e-14;
    }
  };
  auto evaluate = [&](const Eigen::VectorXd& theta,
                      const Eigen::MatrixXd& signs) {
    std::vector<Eigen::VectorXd> w;
    for (int k = 0; k < spec.T; ++k)
      w.push_back(model.E.E * signs.col(k));
    try {
      RolloutResult r = closed_loop_rollout(model, spec, sol, theta, w, true);
      Score s{r.max_constraint, 0.0};
      for (const auto& vals : r.stage_values)
        if (vals.size() > 0) s.spread += vals.maxCoeff();
      if (r.terminal_values.size() > 0)
        s.spread += r.terminal_values.maxCoeff();
      return std::make_pair(s, std::move(r));
    } catch (const NumericalError&) {
      return std::make_pair(Score{ninf, ninf}, RolloutResult{});
    }
  };

  AdversarialResult best;
  best.peak = ninf;
  for (const Eigen::VectorXd& theta : vertices(model.Theta)) {
    Eigen::MatrixXd signs = Eigen::MatrixXd::Ones(q, spec.T);
    auto [score, roll] = evaluate(theta, signs);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      bool improved = false;
      for (int k = 0; k < spec.T; ++k)
        for (int g = 0; g < q; ++g) {
          signs(g, k) = -signs(g, k);
          auto [cand, croll] = evaluate(theta, signs);
          if (cand.beats(score)) {
            score = cand;
            roll = std::move(croll);
            improved = true;
          } else {
            signs(g, k) = -signs(g, k);
          }
        }
      if (!improved) break;
    }
    if (score.peak > best.peak) {
      best.peak = score.peak;
      best.theta = theta;
      best.w = roll.w;
      best.rollout = std::move(roll);
    }
  }
  return best;
}

}  // namespace rsls
