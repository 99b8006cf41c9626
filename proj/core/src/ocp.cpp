#include "rsls/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

namespace rsls {

namespace {
using Triplet = Eigen::Triplet<double>;
}

// ---------------------------------------------------------------------------
// Assembly tables shared by all callbacks of one assembled problem.
// ---------------------------------------------------------------------------
struct OcpData {
  OcpSpec spec;
  UncertainModel model;  // effective model for the mode
  OcpLayout L;

  std::vector<Eigen::VectorXd> verts;  // all parameter vertices
  std::vector<int> vert_pair;          // index into pair_theta, -1 for theta=0
  std::vector<Eigen::VectorXd> pair_theta;  // one representative per +/- pair

  Eigen::VectorXd mu;          // per-coordinate curvature bound
  Eigen::VectorXd e_row_norm;  // || e_i' E ||_1

  // --- slacks: one variable per distinct absolute-value term ------------
  // Linear forms over beta with constant coefficients (first coefficient
  // normalized to one; each use carries its own scale).
  struct LinearForm {
    std::vector<std::pair<int, double>> t;
  };
  std::vector<LinearForm> lin;
  // Entry of e_i' (A_th th Phi_x^{k-1} + B_th th Phi_u^{k-1}): coefficients
  // re-evaluated at (z_k, v_k), shared between the +/- vertices of a pair.
  struct Bilin {
    int k, i, pair, j, m;
  };
  std::vector<Bilin> bil;
  // e_i' f_theta(z_k, v_k) theta.
  struct Fth {
    int k, i, pair;
  };
  std::vector<Fth> fth;
  int n_lin = 0, n_bil = 0, n_fth = 0;

  struct Use {
    int id;
    double scale;
  };
  struct FilterRow {
    int k, i, vert;
    std::vector<Use> uses;
  };
  std::vector<FilterRow> f_rows;
  struct TightenRow {
    int k;  // stage index; -1 for terminal
    Eigen::VectorXd c;
    double b;
    std::vector<Use> uses;
  };
  std::vector<TightenRow> t_rows;
  struct TauRow {
    int k;
    std::vector<Use> uses;
  };
  std::vector<TauRow> tau_rows;
  struct PerfRow {
    std::vector<Use> uses;
  };
  std::vector<PerfRow> p_rows;

  // inequality row offsets
  int off_filter = 0, off_tighten = 0, off_taurow = 0, off_perf = 0;
  int m_in = 0;
  // equality row offsets
  int off_dyn = 0, off_slp = 0;
  int m_eq = 0;
};

namespace {

// Per-step model derivatives needed by the callbacks.
struct StepInfo {
  Eigen::MatrixXd A, B;                    // Jacobians of fbar
  Eigen::MatrixXd Fth;                     // f_theta(z, v)
  std::vector<Eigen::MatrixXd> Ath, Bth;   // per pair: sum_p theta_p * jac_p
};

StepInfo step_info(const OcpData& d, const Eigen::VectorXd& zk,
                   const Eigen::VectorXd& vk, bool need_theta) {
  StepInfo s;
  Linearization lin = jacobians_fd(d.model, zk, vk);
  s.A = std::move(lin.A);
  s.B = std::move(lin.B);
  if (need_theta) {
    s.Fth = d.model.ftheta(zk, vk);
    const int nx = d.L.nx, nu = d.L.nu;
    for (const auto& th : d.pair_theta) {
      Eigen::MatrixXd Ath = Eigen::MatrixXd::Zero(nx, nx);
      Eigen::MatrixXd Bth = Eigen::MatrixXd::Zero(nx, nu);
      for (int p = 0; p < th.size(); ++p) {
        Ath += th[p] * lin.theta.A[static_cast<size_t>(p)];
        Bth += th[p] * lin.theta.B[static_cast<size_t>(p)];
      }
      s.Ath.push_back(std::move(Ath));
      s.Bth.push_back(std::move(Bth));
    }
  }
  return s;
}

double slack_value(const OcpData& d, int q, const Eigen::VectorXd& beta,
                   const std::vector<StepInfo>& steps) {
  if (q < d.n_lin) {
    double r = 0;
    for (const auto& [idx, coef] : d.lin[static_cast<size_t>(q)].t)
      r += coef * beta[idx];
    return r;
  }
  const int nx = d.L.nx, nu = d.L.nu;
  if (q < d.n_lin + d.n_bil) {
    const auto& e = d.bil[static_cast<size_t>(q - d.n_lin)];
    const auto& st = steps[static_cast<size_t>(e.k)];
    return st.Ath[static_cast<size_t>(e.pair)]
               .row(e.i)
               .dot(beta.segment(d.L.phix(e.k - 1, e.j, 0, e.m), nx)) +
           st.Bth[static_cast<size_t>(e.pair)]
               .row(e.i)
               .dot(beta.segment(d.L.phiu(e.k - 1, e.j, 0, e.m), nu));
  }
  const auto& e = d.fth[static_cast<size_t>(q - d.n_lin - d.n_bil)];
  return (steps[static_cast<size_t>(e.k)].Fth.row(e.i) *
          d.pair_theta[static_cast<size_t>(e.pair)])(0);
}

std::vector<StepInfo> all_steps(const OcpData& d, const Eigen::VectorXd& beta,
                                bool need_theta) {
  std::vector<StepInfo> steps;
  steps.reserve(static_cast<size_t>(d.L.T));
  for (int k = 0; k < d.L.T; ++k)
    steps.push_back(step_info(d, beta.segment(d.L.z(k, 0), d.L.nx),
                              beta.segment(d.L.v(k, 0), d.L.nu), need_theta));
  return steps;
}

// Interning registry mapping canonicalized linear forms to slack ids.
struct Registry {
  std::map<std::vector<std::pair<int, double>>, int> index;
  std::vector<OcpData::LinearForm>* forms;

  OcpData::Use intern(std::vector<std::pair<int, double>> t) {
    std::sort(t.begin(), t.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::erase_if(t, [](const auto& e) { return e.second == 0.0; });
    if (t.empty()) return {-1, 0.0};
    const double a = t.front().second;
    for (auto& e : t) e.second /= a;
    auto it = index.find(t);
    if (it == index.end()) {
      const int id = static_cast<int>(forms->size());
      forms->push_back({t});
      it = index.emplace(std::move(t), id).first;
    }
    return {it->second, std::abs(a)};
  }
};

void check_spec(const OcpSpec& spec) {
  const int nx = spec.model.nx, nu = spec.model.nu;
  require_dim(spec.T >= 1, "ocp: horizon must be positive");
  require_dim(nx >= 1 && nu >= 1, "ocp: model dimensions");
  require_dim(spec.xbar.size() == nx, "ocp: initial state length");
  require_dim(spec.Q.rows() == nx && spec.Q.cols() == nx, "ocp: Q shape");
  require_dim(spec.R.rows() == nu && spec.R.cols() == nu, "ocp: R shape");
  require_dim(spec.Qf.rows() == nx && spec.Qf.cols() == nx, "ocp: Qf shape");
  require_dim(spec.lambda >= 0.0, "ocp: regularization weight sign");
  for (const auto& sc : spec.constraints)
    require_dim(sc.c.size() == nx + nu, "ocp: stage constraint row length");
  for (const auto& tc : spec.terminal)
    require_dim(tc.c.size() == nx, "ocp: terminal constraint row length");
  require_dim(spec.model.E.dim() == nx, "ocp: additive set dimension");
  if (spec.mode != OcpMode::nominal)
    require_dim(spec.mu.mu.size() == nx, "ocp: curvature bound length");
  if (spec.performance) {
    const auto& p = *spec.performance;
    require_dim(p.C.T() == spec.T && p.C.q() == nx && p.D.T() == spec.T &&
                    p.D.q() == nu && p.C.p() == p.D.p(),
                "ocp: performance operator shapes");
    require_dim(p.gamma > 0.0, "ocp: performance bound sign");
  }
  if (spec.mode == OcpMode::offline)
    require_dim(spec.offline_fraction >= 0.0, "ocp: inflation fraction sign");
}

}  // namespace

// ---------------------------------------------------------------------------
// pack / unpack / cost
// ---------------------------------------------------------------------------
Eigen::VectorXd pack(const OcpLayout& L, const OcpPoint& pt) {
  require_dim(static_cast<int>(pt.z.size()) == L.T + 1 &&
                  static_cast<int>(pt.v.size()) == L.T,
              "pack: trajectory lengths");
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(L.n);
  for (int k = 0; k <= L.T; ++k) beta.segment(L.z(k, 0), L.nx) = pt.z[k];
  for (int k = 0; k < L.T; ++k) beta.segment(L.v(k, 0), L.nu) = pt.v[k];
  if (L.has_response()) {
    for (int k = 0; k < L.T; ++k) {
      for (int j = 0; j <= k; ++j)
        for (int c = 0; c < L.nx; ++c) {
          beta.segment(L.phix(k, j, 0, c), L.nx) =
              pt.resp.Phi_x.block(k, j).col(c);
          beta.segment(L.phiu(k, j, 0, c), L.nu) =
              pt.resp.Phi_u.block(k, j).col(c);
        }
      beta.segment(L.sigma(k, 0), L.nx) = pt.resp.sigma[static_cast<size_t>(k)];
      beta[L.tau(k)] = pt.resp.tau[k];
    }
  }
  return beta;
}

OcpPoint unpack(const OcpLayout& L, const Eigen::VectorXd& beta) {
  require_dim(beta.size() == L.n, "unpack: vector length");
  OcpPoint pt;
  for (int k = 0; k <= L.T; ++k) pt.z.push_back(beta.segment(L.z(k, 0), L.nx));
  for (int k = 0; k < L.T; ++k) pt.v.push_back(beta.segment(L.v(k, 0), L.nu));
  pt.resp.Phi_x = CausalOperator(L.T, L.nx, L.nx);
  pt.resp.Phi_u = CausalOperator(L.T, L.nu, L.nx);
  pt.resp.tau = Eigen::VectorXd::Zero(L.T);
  if (L.has_response()) {
    for (int k = 0; k < L.T; ++k) {
      for (int j = 0; j <= k; ++j)
        for (int c = 0; c < L.nx; ++c) {
          pt.resp.Phi_x.block(k, j).col(c) =
              beta.segment(L.phix(k, j, 0, c), L.nx);
          pt.resp.Phi_u.block(k, j).col(c) =
              beta.segment(L.phiu(k, j, 0, c), L.nu);
        }
      pt.resp.sigma.push_back(beta.segment(L.sigma(k, 0), L.nx));
      pt.resp.tau[k] = beta[L.tau(k)];
    }
  } else {
    // Degenerate response at the positivity floor so gain recovery and tube
    // evaluation stay well defined.
    for (int k = 0; k < L.T; ++k) {
      pt.resp.Phi_x.block(k, 0) =
          kSigmaMin * Eigen::MatrixXd::Identity(L.nx, L.nx);
      pt.resp.sigma.push_back(Eigen::VectorXd::Constant(L.nx, kSigmaMin));
    }
  }
  return pt;
}

double nominal_cost(const OcpSpec& spec, const std::vector<Eigen::VectorXd>& z,
                    const std::vector<Eigen::VectorXd>& v) {
  require_dim(static_cast<int>(z.size()) == spec.T + 1 &&
                  static_cast<int>(v.size()) == spec.T,
              "nominal_cost: trajectory lengths");
  double cost = z.back().dot(spec.Qf * z.back());
  for (int k = 0; k < spec.T; ++k)
    cost += z[static_cast<size_t>(k)].dot(spec.Q * z[static_cast<size_t>(k)]) +
            v[static_cast<size_t>(k)].dot(spec.R * v[static_cast<size_t>(k)]);
  return cost;
}

// ---------------------------------------------------------------------------
// assemble
// ---------------------------------------------------------------------------
Ocp assemble(const OcpSpec& spec) {
  check_spec(spec);
  auto data = std::make_shared<OcpData>();
  OcpData& d = *data;
  d.spec = spec;
  d.model = spec.model;
  const int nx = spec.model.nx, nu = spec.model.nu, T = spec.T;

  // Mode adjustments: collapse the parameter set, inflate the additive set.
  if (spec.mode != OcpMode::robust) {
    const int nth = d.model.Theta.dim();
    d.model.Theta = ParamBox(Eigen::VectorXd::Zero(nth),
                             Eigen::VectorXd::Zero(nth));
  }
  if (spec.mode == OcpMode::offline) {
    const double alpha = spec.offline_fraction * 0.01;
    Eigen::MatrixXd E(nx, d.model.E.n_gen() + nx);
    E << d.model.E.E, alpha * Eigen::MatrixXd::Identity(nx, nx);
    d.model.E = BoxImageSet{E};
  }

  // Layout (slack count filled in below).
  OcpLayout& L = d.L;
  L.T = T;
  L.nx = nx;
  L.nu = nu;
  L.mode = spec.mode;
  const int n_tri = T * (T + 1) / 2;
  L.off_z = 0;
  L.off_v = (T + 1) * nx;
  if (spec.mode == OcpMode::nominal) {
    L.off_phix = L.off_phiu = L.off_sigma = L.off_tau = L.off_slack =
        L.off_v + T * nu;
  } else {
    L.off_phix = L.off_v + T * nu;
    L.off_phiu = L.off_phix + n_tri * nx * nx;
    L.off_sigma = L.off_phiu + n_tri * nu * nx;
    L.off_tau = L.off_sigma + T * nx;
    L.off_slack = L.off_tau + T;
  }

  if (spec.mode != OcpMode::nominal) {
    d.mu = spec.mu.mu;
    d.e_row_norm = d.model.E.E.cwiseAbs().rowwise().sum();

    // Parameter vertices and their +/- pair representatives.
    d.verts = vertices(d.model.Theta);
    for (const auto& th : d.verts) {
      if (th.size() == 0 || th.isZero(0.0)) {
        d.vert_pair.push_back(-1);
        continue;
      }
      Eigen::VectorXd canon = th;
      for (int p = 0; p < canon.size(); ++p) {
        if (canon[p] == 0.0) continue;
        if (canon[p] < 0.0) canon = -canon;
        break;
      }
      int id = -1;
      for (size_t q = 0; q < d.pair_theta.size(); ++q)
        if (d.pair_theta[q] == canon) id = static_cast<int>(q);
      if (id < 0) {
        id = static_cast<int>(d.pair_theta.size());
        d.pair_theta.push_back(canon);
      }
      d.vert_pair.push_back(id);
    }
  }

  Registry reg;
  reg.forms = &d.lin;

  if (spec.mode != OcpMode::nominal) {
    // Stage tightening rows k = 0..T-1 (the k = 0 tube is a point), then the
    // terminal rows on the final state.
    for (int k = 0; k < T; ++k)
      for (const auto& sc : spec.constraints) {
        OcpData::TightenRow row{k, sc.c, sc.b, {}};
        for (int j = 0; j < k; ++j)
          for (int m = 0; m < nx; ++m) {
            std::vector<std::pair<int, double>> form;
            for (int a = 0; a < nx; ++a)
              form.emplace_back(L.phix(k - 1, j, a, m), sc.c[a]);
            for (int b = 0; b < nu; ++b)
              form.emplace_back(L.phiu(k - 1, j, b, m), sc.c[nx + b]);
            auto use = reg.intern(std::move(form));
            if (use.id >= 0) row.uses.push_back(use);
          }
        d.t_rows.push_back(std::move(row));
      }
    for (const auto& tc : spec.terminal) {
      OcpData::TightenRow row{-1, tc.c, tc.b, {}};
      for (int j = 0; j < T; ++j)
        for (int m = 0; m < nx; ++m) {
          std::vector<std::pair<int, double>> form;
          for (int a = 0; a < nx; ++a)
            form.emplace_back(L.phix(T - 1, j, a, m), tc.c[a]);
          auto use = reg.intern(std::move(form));
          if (use.id >= 0) row.uses.push_back(use);
        }
      d.t_rows.push_back(std::move(row));
    }

    // tau rows: every row of the stacked response row k-1 bounded by tau_k.
    for (int k = 0; k < T; ++k)
      for (int r = 0; r < nx + nu; ++r) {
        OcpData::TauRow row{k, {}};
        for (int j = 0; j < k; ++j)
          for (int m = 0; m < nx; ++m) {
            const int idx = r < nx ? L.phix(k - 1, j, r, m)
                                   : L.phiu(k - 1, j, r - nx, m);
            row.uses.push_back(reg.intern({{idx, 1.0}}));
          }
        d.tau_rows.push_back(std::move(row));
      }

    // Performance rows: each row of C Phi_x + D Phi_u bounded by gamma.
    if (spec.performance) {
      const auto& P = *spec.performance;
      const int ny = P.C.p();
      for (int K = 0; K < T; ++K)
        for (int y = 0; y < ny; ++y) {
          OcpData::PerfRow row;
          for (int j = 0; j <= K; ++j)
            for (int c = 0; c < nx; ++c) {
              std::vector<std::pair<int, double>> form;
              for (int a = 0; a <= j; ++a) {
                for (int i = 0; i < nx; ++i)
                  form.emplace_back(L.phix(K - a, j - a, i, c),
                                    P.C.block(K, a)(y, i));
                for (int i = 0; i < nu; ++i)
                  form.emplace_back(L.phiu(K - a, j - a, i, c),
                                    P.D.block(K, a)(y, i));
              }
              auto use = reg.intern(std::move(form));
              if (use.id >= 0) row.uses.push_back(use);
            }
          d.p_rows.push_back(std::move(row));
        }
    }
    d.n_lin = static_cast<int>(d.lin.size());

    // Bilinear parametric entries and direct f_theta terms, one slack per
    // +/- vertex pair.
    const int n_pair = static_cast<int>(d.pair_theta.size());
    std::vector<int> bil_base(static_cast<size_t>(T * nx * n_pair), -1);
    std::vector<int> fth_base(static_cast<size_t>(T * nx * n_pair), -1);
    for (int k = 0; k < T; ++k)
      for (int i = 0; i < nx; ++i)
        for (int p = 0; p < n_pair; ++p) {
          const size_t key = static_cast<size_t>((k * nx + i) * n_pair + p);
          bil_base[key] = static_cast<int>(d.bil.size());
          for (int j = 0; j < k; ++j)
            for (int m = 0; m < nx; ++m) d.bil.push_back({k, i, p, j, m});
          fth_base[key] = static_cast<int>(d.fth.size());
          d.fth.push_back({k, i, p});
        }
    d.n_bil = static_cast<int>(d.bil.size());
    d.n_fth = static_cast<int>(d.fth.size());

    // Filter rows, one per (step, coordinate, vertex).
    for (int k = 0; k < T; ++k)
      for (int i = 0; i < nx; ++i)
        for (int vtx = 0; vtx < static_cast<int>(d.verts.size()); ++vtx) {
          OcpData::FilterRow row{k, i, vtx, {}};
          const int p = d.vert_pair[static_cast<size_t>(vtx)];
          if (p >= 0) {
            const size_t key = static_cast<size_t>((k * nx + i) * n_pair + p);
            for (int e = 0; e < k * nx; ++e)
              row.uses.push_back({d.n_lin + bil_base[key] + e, 1.0});
            row.uses.push_back({d.n_lin + d.n_bil + fth_base[key], 1.0});
          }
          d.f_rows.push_back(std::move(row));
        }
  } else {
    // Nominal mode: plain stage/terminal constraints, no tube terms.
    for (int k = 0; k < T; ++k)
      for (const auto& sc : spec.constraints)
        d.t_rows.push_back({k, sc.c, sc.b, {}});
    for (const auto& tc : spec.terminal)
      d.t_rows.push_back({-1, tc.c, tc.b, {}});
  }

  L.n_slack = d.n_lin + d.n_bil + d.n_fth;
  L.n = L.off_slack + L.n_slack;

  // Row offsets.
  d.off_filter = 2 * L.n_slack;
  d.off_tighten = d.off_filter + static_cast<int>(d.f_rows.size());
  d.off_taurow = d.off_tighten + static_cast<int>(d.t_rows.size());
  d.off_perf = d.off_taurow + static_cast<int>(d.tau_rows.size());
  d.m_in = d.off_perf + static_cast<int>(d.p_rows.size());
  d.off_dyn = nx;
  d.off_slp = nx + T * nx;
  d.m_eq = d.off_slp +
           (spec.mode == OcpMode::nominal ? 0 : n_tri * nx * nx);

  // -------------------------------------------------------------------
  // NlpProblem
  // -------------------------------------------------------------------
  Ocp ocp;
  ocp.spec = spec;
  ocp.model = d.model;
  ocp.theta_vertices = d.verts;
  ocp.layout = L;
  ocp.rows = {d.off_filter,
              d.off_tighten,
              d.off_taurow,
              d.off_perf,
              static_cast<int>(d.f_rows.size()),
              static_cast<int>(d.t_rows.size()),
              static_cast<int>(d.tau_rows.size()),
              static_cast<int>(d.p_rows.size())};
  ocp.data = data;

  NlpProblem& nlp = ocp.nlp;
  nlp.n = L.n;
  nlp.m_eq = d.m_eq;
  nlp.m_in = d.m_in;
  nlp.lb = Eigen::VectorXd::Constant(
      L.n, -std::numeric_limits<double>::infinity());
  nlp.ub = Eigen::VectorXd::Constant(
      L.n, std::numeric_limits<double>::infinity());
  if (spec.mode != OcpMode::nominal) {
    for (int k = 0; k < T; ++k) {
      for (int i = 0; i < nx; ++i) nlp.lb[L.sigma(k, i)] = kSigmaMin;
      nlp.lb[L.tau(k)] = 0.0;
    }
    for (int q = 0; q < L.n_slack; ++q) nlp.lb[L.slack(q)] = 0.0;
  }

  // Quadratic objective plus Tikhonov regularization over everything.
  {
    std::vector<Triplet> trip;
    auto add_block = [&](const Eigen::MatrixXd& W, int off) {
      for (int c = 0; c < W.cols(); ++c)
        for (int r = 0; r < W.rows(); ++r)
          if (W(r, c) != 0.0) trip.emplace_back(off + r, off + c, 2.0 * W(r, c));
    };
    for (int k = 0; k < T; ++k) {
      add_block(spec.Q, L.z(k, 0));
      add_block(spec.R, L.v(k, 0));
    }
    add_block(spec.Qf, L.z(T, 0));
    for (int i = 0; i < L.n; ++i)
      trip.emplace_back(i, i, 2.0 * spec.lambda);
    nlp.H0.resize(L.n, L.n);
    nlp.H0.setFromTriplets(trip.begin(), trip.end());
  }
  nlp.g0 = Eigen::VectorXd::Zero(L.n);

  // Elastic flags: group rows yes, slack-definition rows no (always
  // satisfiable by raising the slack).
  nlp.elastic.assign(static_cast<size_t>(d.m_in), 1);
  for (int r = 0; r < 2 * L.n_slack; ++r) nlp.elastic[static_cast<size_t>(r)] = 0;

  nlp.eval_eq = [data](const Eigen::VectorXd& beta) {
    const OcpData& d = *data;
    const OcpLayout& L = d.L;
    const int nx = L.nx;
    OcpPoint pt = unpack(L, beta);
    Eigen::VectorXd ceq(d.m_eq);
    ceq.head(nx) = pt.z[0] - d.spec.xbar;
    for (int k = 0; k < L.T; ++k)
      ceq.segment(d.off_dyn + k * nx, nx) =
          pt.z[static_cast<size_t>(k + 1)] -
          d.model.fbar(pt.z[static_cast<size_t>(k)],
                       pt.v[static_cast<size_t>(k)]);
    if (L.has_response()) {
      std::vector<Eigen::MatrixXd> A_seq(static_cast<size_t>(L.T)),
          B_seq(static_cast<size_t>(L.T));
      A_seq[0] = Eigen::MatrixXd::Zero(nx, nx);
      B_seq[0] = Eigen::MatrixXd::Zero(nx, L.nu);
      for (int t = 1; t < L.T; ++t) {
        Linearization lin = jacobians_fd(d.model, pt.z[static_cast<size_t>(t)],
                                         pt.v[static_cast<size_t>(t)]);
        A_seq[static_cast<size_t>(t)] = std::move(lin.A);
        B_seq[static_cast<size_t>(t)] = std::move(lin.B);
      }
      CausalOperator res = slp_residual(A_seq, B_seq, pt.resp);
      for (int k = 0; k < L.T; ++k)
        for (int j = 0; j <= k; ++j) {
          const int base = d.off_slp + OcpLayout::tri(k, j) * nx * nx;
          for (int c = 0; c < nx; ++c)
            ceq.segment(base + c * nx, nx) = res.block(k, j).col(c);
        }
    }
    if (!ceq.allFinite()) {
      int bad = 0;
      while (std::isfinite(ceq[bad])) ++bad;
      throw NumericalError("equality row " + std::to_string(bad) +
                           " is not finite");
    }
    return ceq;
  };

  nlp.jac_eq = [data](const Eigen::VectorXd& beta,
                      std::vector<Triplet>& trip) {
    const OcpData& d = *data;
    const OcpLayout& L = d.L;
    const int nx = L.nx, nu = L.nu;
    OcpPoint pt = unpack(L, beta);
    for (int r = 0; r < nx; ++r) trip.emplace_back(r, L.z(0, r), 1.0);
    std::vector<StepInfo> steps = all_steps(d, beta, false);
    for (int k = 0; k < L.T; ++k) {
      const auto& st = steps[static_cast<size_t>(k)];
      for (int r = 0; r < nx; ++r) {
        const int row = d.off_dyn + k * nx + r;
        for (int a = 0; a < nx; ++a)
          trip.emplace_back(row, L.z(k, a), -st.A(r, a));
        for (int b = 0; b < nu; ++b)
          trip.emplace_back(row, L.v(k, b), -st.B(r, b));
        trip.emplace_back(row, L.z(k + 1, r), 1.0);
      }
    }
    if (!L.has_response()) return;
    // Hessians of fbar give the derivative of the step Jacobians with
    // respect to the linearization point.
    std::vector<std::vector<Eigen::MatrixXd>> H(static_cast<size_t>(L.T));
    for (int k = 1; k < L.T; ++k)
      for (int i = 0; i < nx; ++i)
        H[static_cast<size_t>(k)].push_back(
            hessian(d.model, pt.z[static_cast<size_t>(k)],
                    pt.v[static_cast<size_t>(k)],
                    Eigen::VectorXd::Zero(d.model.ntheta), i));
    for (int k = 0; k < L.T; ++k)
      for (int j = 0; j <= k; ++j) {
        const int base = d.off_slp + OcpLayout::tri(k, j) * nx * nx;
        Eigen::MatrixXd M;  // stacked previous block [Phi_x; Phi_u]
        if (k >= 1 && j >= 1) {
          M.resize(nx + nu, nx);
          M.topRows(nx) = pt.resp.Phi_x.block(k - 1, j - 1);
          M.bottomRows(nu) = pt.resp.Phi_u.block(k - 1, j - 1);
        }
        for (int m = 0; m < nx; ++m)
          for (int r = 0; r < nx; ++r) {
            const int row = base + m * nx + r;
            trip.emplace_back(row, L.phix(k, j, r, m), 1.0);
            if (k >= 1 && j >= 1) {
              const auto& st = steps[static_cast<size_t>(k)];
              for (int a = 0; a < nx; ++a)
                trip.emplace_back(row, L.phix(k - 1, j - 1, a, m),
                                  -st.A(r, a));
              for (int b = 0; b < nu; ++b)
                trip.emplace_back(row, L.phiu(k - 1, j - 1, b, m),
                                  -st.B(r, b));
              const Eigen::VectorXd grad =
                  H[static_cast<size_t>(k)][static_cast<size_t>(r)] * M.col(m);
              for (int c = 0; c < nx + nu; ++c)
                trip.emplace_back(row,
                                  c < nx ? L.z(k, c) : L.v(k, c - nx),
                                  -grad[c]);
            }
            if (j == 0 && r == m)
              trip.emplace_back(row, L.sigma(k, r), -1.0);
          }
      }
  };

  nlp.eval_in = [data](const Eigen::VectorXd& beta) {
    const OcpData& d = *data;
    const OcpLayout& L = d.L;
    Eigen::VectorXd cin(d.m_in);
    const bool resp = L.has_response();
    std::vector<StepInfo> steps;
    if (resp) steps = all_steps(d, beta, true);
    for (int q = 0; q < L.n_slack; ++q) {
      const double r = slack_value(d, q, beta, steps);
      const double s = beta[L.slack(q)];
      cin[2 * q] = r - s;
      cin[2 * q + 1] = -r - s;
    }
    for (size_t f = 0; f < d.f_rows.size(); ++f) {
      const auto& row = d.f_rows[f];
      double lhs = d.e_row_norm[row.i] +
                   beta[L.tau(row.k)] * beta[L.tau(row.k)] * d.mu[row.i] -
                   beta[L.sigma(row.k, row.i)];
      for (const auto& u : row.uses)
        lhs += u.scale * beta[L.slack(u.id)];
      cin[d.off_filter + static_cast<int>(f)] = lhs;
    }
    const int nx = L.nx, nu = L.nu;
    for (size_t t = 0; t < d.t_rows.size(); ++t) {
      const auto& row = d.t_rows[t];
      double lhs = row.b;
      if (row.k >= 0)
        lhs += row.c.head(nx).dot(beta.segment(L.z(row.k, 0), nx)) +
               row.c.tail(nu).dot(beta.segment(L.v(row.k, 0), nu));
      else
        lhs += row.c.dot(beta.segment(L.z(L.T, 0), nx));
      for (const auto& u : row.uses)
        lhs += u.scale * beta[L.slack(u.id)];
      cin[d.off_tighten + static_cast<int>(t)] = lhs;
    }
    for (size_t t = 0; t < d.tau_rows.size(); ++t) {
      const auto& row = d.tau_rows[t];
      double lhs = -beta[L.tau(row.k)];
      for (const auto& u : row.uses)
        lhs += u.scale * beta[L.slack(u.id)];
      cin[d.off_taurow + static_cast<int>(t)] = lhs;
    }
    for (size_t p = 0; p < d.p_rows.size(); ++p) {
      double lhs = -d.spec.performance->gamma;
      for (const auto& u : d.p_rows[p].uses)
        lhs += u.scale * beta[L.slack(u.id)];
      cin[d.off_perf + static_cast<int>(p)] = lhs;
    }
    if (!cin.allFinite()) {
      int bad = 0;
      while (std::isfinite(cin[bad])) ++bad;
      throw NumericalError("inequality row " + std::to_string(bad) +
                           " is not finite");
    }
    return cin;
  };

  nlp.jac_in = [data](const Eigen::VectorXd& beta,
                      std::vector<Triplet>& trip) {
    const OcpData& d = *data;
    const OcpLayout& L = d.L;
    const int nx = L.nx, nu = L.nu;
    const bool resp = L.has_response();
    std::vector<StepInfo> steps;
    if (resp) steps = all_steps(d, beta, true);
    // Mixed parametric second derivatives: d(A_th th)/d(z,v) contracted
    // against the response column, via Hessian differences at the vertex.
    const int n_pair = static_cast<int>(d.pair_theta.size());
    std::vector<Eigen::MatrixXd> Hd(
        static_cast<size_t>(L.T * nx * std::max(n_pair, 1)));
    if (resp && n_pair > 0) {
      const Eigen::VectorXd th0 = Eigen::VectorXd::Zero(d.model.ntheta);
      for (int k = 0; k < L.T; ++k) {
        const Eigen::VectorXd zk = beta.segment(L.z(k, 0), nx);
        const Eigen::VectorXd vk = beta.segment(L.v(k, 0), nu);
        for (int i = 0; i < nx; ++i)
          for (int p = 0; p < n_pair; ++p)
            Hd[static_cast<size_t>((k * nx + i) * n_pair + p)] =
                hessian(d.model, zk, vk, d.pair_theta[static_cast<size_t>(p)],
                        i) -
                hessian(d.model, zk, vk, th0, i);
      }
    }
    auto emit_pm = [&](int q, const std::vector<std::pair<int, double>>& cols) {
      for (const auto& [idx, val] : cols) trip.emplace_back(2 * q, idx, val);
      trip.emplace_back(2 * q, L.slack(q), -1.0);
      for (const auto& [idx, val] : cols)
        trip.emplace_back(2 * q + 1, idx, -val);
      trip.emplace_back(2 * q + 1, L.slack(q), -1.0);
    };
    std::vector<std::pair<int, double>> cols;
    for (int q = 0; q < d.n_lin; ++q)
      emit_pm(q, d.lin[static_cast<size_t>(q)].t);
    for (int e = 0; e < d.n_bil; ++e) {
      const auto& s = d.bil[static_cast<size_t>(e)];
      const auto& st = steps[static_cast<size_t>(s.k)];
      cols.clear();
      for (int a = 0; a < nx; ++a)
        cols.emplace_back(L.phix(s.k - 1, s.j, a, s.m),
                          st.Ath[static_cast<size_t>(s.pair)](s.i, a));
      for (int b = 0; b < nu; ++b)
        cols.emplace_back(L.phiu(s.k - 1, s.j, b, s.m),
                          st.Bth[static_cast<size_t>(s.pair)](s.i, b));
      Eigen::VectorXd Mcol(nx + nu);
      Mcol.head(nx) = beta.segment(L.phix(s.k - 1, s.j, 0, s.m), nx);
      Mcol.tail(nu) = beta.segment(L.phiu(s.k - 1, s.j, 0, s.m), nu);
      const Eigen::VectorXd grad =
          Hd[static_cast<size_t>((s.k * nx + s.i) * n_pair + s.pair)] * Mcol;
      for (int c = 0; c < nx + nu; ++c)
        cols.emplace_back(c < nx ? L.z(s.k, c) : L.v(s.k, c - nx), grad[c]);
      emit_pm(d.n_lin + e, cols);
    }
    for (int e = 0; e < d.n_fth; ++e) {
      const auto& s = d.fth[static_cast<size_t>(e)];
      const auto& st = steps[static_cast<size_t>(s.k)];
      cols.clear();
      for (int c = 0; c < nx + nu; ++c)
        cols.emplace_back(
            c < nx ? L.z(s.k, c) : L.v(s.k, c - nx),
            c < nx ? st.Ath[static_cast<size_t>(s.pair)](s.i, c)
                   : st.Bth[static_cast<size_t>(s.pair)](s.i, c - nx));
      emit_pm(d.n_lin + d.n_bil + e, cols);
    }
    for (size_t f = 0; f < d.f_rows.size(); ++f) {
      const auto& row = d.f_rows[f];
      const int r = d.off_filter + static_cast<int>(f);
      for (const auto& u : row.uses)
        trip.emplace_back(r, L.slack(u.id), u.scale);
      trip.emplace_back(r, L.tau(row.k),
                        2.0 * beta[L.tau(row.k)] * d.mu[row.i]);
      trip.emplace_back(r, L.sigma(row.k, row.i), -1.0);
    }
    for (size_t t = 0; t < d.t_rows.size(); ++t) {
      const auto& row = d.t_rows[t];
      const int r = d.off_tighten + static_cast<int>(t);
      if (row.k >= 0) {
        for (int a = 0; a < nx; ++a)
          if (row.c[a] != 0.0)
            trip.emplace_back(r, L.z(row.k, a), row.c[a]);
        for (int b = 0; b < nu; ++b)
          if (row.c[nx + b] != 0.0)
            trip.emplace_back(r, L.v(row.k, b), row.c[nx + b]);
      } else {
        for (int a = 0; a < nx; ++a)
          if (row.c[a] != 0.0) trip.emplace_back(r, L.z(L.T, a), row.c[a]);
      }
      for (const auto& u : row.uses)
        trip.emplace_back(r, L.slack(u.id), u.scale);
    }
    for (size_t t = 0; t < d.tau_rows.size(); ++t) {
      const auto& row = d.tau_rows[t];
      const int r = d.off_taurow + static_cast<int>(t);
      for (const auto& u : row.uses)
        trip.emplace_back(r, L.slack(u.id), u.scale);
      trip.emplace_back(r, L.tau(row.k), -1.0);
    }
    for (size_t p = 0; p < d.p_rows.size(); ++p) {
      const int r = d.off_perf + static_cast<int>(p);
      for (const auto& u : d.p_rows[p].uses)
        trip.emplace_back(r, L.slack(u.id), u.scale);
    }
  };

  return ocp;
}

// ---------------------------------------------------------------------------
void set_slacks_exact(const Ocp& ocp, Eigen::VectorXd& beta) {
  const OcpData& d = *ocp.data;
  const OcpLayout& L = d.L;
  if (!L.has_response()) return;
  std::vector<StepInfo> steps = all_steps(d, beta, true);
  for (int q = 0; q < L.n_slack; ++q)
    beta[L.slack(q)] = std::abs(slack_value(d, q, beta, steps));
}

InitialGuess initial_guess(const Ocp& ocp, const SolverConfig& cfg) {
  const OcpSpec& spec = ocp.spec;
  const OcpLayout& L = ocp.layout;
  InitialGuess ig;
  ig.nominal_report.status = SolveReport::Status::optimal;

  // Phase 1: nominal trajectory from a zero-input rollout.
  std::vector<Eigen::VectorXd> v(static_cast<size_t>(spec.T),
                                 Eigen::VectorXd::Zero(L.nu));
  std::vector<Eigen::VectorXd> z = rollout_nominal(spec.model, spec.xbar, v);
  if (spec.mode == OcpMode::nominal) {
    OcpPoint pt;
    pt.z = std::move(z);
    pt.v = std::move(v);
    ig.beta = pack(L, pt);
    return ig;
  }
  OcpSpec nspec = spec;
  nspec.mode = OcpMode::nominal;
  Ocp nocp = assemble(nspec);
  OcpPoint np;
  np.z = std::move(z);
  np.v = std::move(v);
  auto [nbeta, nrep] = solve(nocp.nlp, cfg, pack(nocp.layout, np));
  ig.nominal_report = nrep;
  np = unpack(nocp.layout, nbeta);

  // Phase 2: zero feedback, filter from the disturbance constants, response
  // propagated through the linearized dynamics.
  OcpPoint pt;
  pt.z = np.z;
  pt.v = np.v;
  pt.resp.Phi_x = CausalOperator(L.T, L.nx, L.nx);
  pt.resp.Phi_u = CausalOperator(L.T, L.nu, L.nx);
  pt.resp.tau = Eigen::VectorXd::Zero(L.T);
  const OcpData& d = *ocp.data;
  std::vector<Eigen::MatrixXd> A_seq;
  for (int k = 0; k < L.T; ++k) {
    Linearization lin = jacobians_fd(d.model, pt.z[static_cast<size_t>(k)],
                                     pt.v[static_cast<size_t>(k)]);
    A_seq.push_back(std::move(lin.A));
    const Eigen::MatrixXd Fth = d.model.ftheta(pt.z[static_cast<size_t>(k)],
                                               pt.v[static_cast<size_t>(k)]);
    Eigen::VectorXd sig = d.e_row_norm;
    for (const auto& th : ocp.theta_vertices)
      if (th.size() > 0)
        sig = sig.cwiseMax(d.e_row_norm + (Fth * th).cwiseAbs());
    pt.resp.sigma.push_back(sig.cwiseMax(kSigmaMin));
  }
  for (int k = 0; k < L.T; ++k) {
    pt.resp.Phi_x.block(k, 0) =
        Eigen::MatrixXd(pt.resp.sigma[static_cast<size_t>(k)].asDiagonal());
    for (int j = 1; j <= k; ++j)
      pt.resp.Phi_x.block(k, j) =
          A_seq[static_cast<size_t>(k)] * pt.resp.Phi_x.block(k - 1, j - 1);
  }
  for (int k = 0; k < L.T; ++k) pt.resp.tau[k] = tau_lhs(pt.resp, k);

  ig.beta = pack(L, pt);
  set_slacks_exact(ocp, ig.beta);
  return ig;
}

// ---------------------------------------------------------------------------
double KernelCheck::worst() const {
  return std::max({max_eq, max_filter, max_tighten, max_tau, max_perf});
}

KernelCheck verify_kernels(const Ocp& ocp, const OcpPoint& pt) {
  const OcpSpec& spec = ocp.spec;
  const UncertainModel& model = ocp.model;
  const int T = spec.T, nx = model.nx;
  KernelCheck chk;

  chk.max_eq = (pt.z[0] - spec.xbar).lpNorm<Eigen::Infinity>();
  for (int k = 0; k < T; ++k)
    chk.max_eq = std::max(
        chk.max_eq,
        (pt.z[static_cast<size_t>(k + 1)] -
         model.fbar(pt.z[static_cast<size_t>(k)], pt.v[static_cast<size_t>(k)]))
            .lpNorm<Eigen::Infinity>());

  const bool resp = ocp.layout.has_response();
  std::vector<Linearization> lins;
  if (resp) {
    std::vector<Eigen::MatrixXd> A_seq, B_seq;
    for (int k = 0; k < T; ++k) {
      lins.push_back(jacobians_fd(model, pt.z[static_cast<size_t>(k)],
                                  pt.v[static_cast<size_t>(k)]));
      A_seq.push_back(lins.back().A);
      B_seq.push_back(lins.back().B);
    }
    chk.max_eq =
        std::max(chk.max_eq, slp_residual(A_seq, B_seq, pt.resp).max_abs());

    for (int k = 0; k < T; ++k) {
      const Eigen::MatrixXd Fth = model.ftheta(pt.z[static_cast<size_t>(k)],
                                               pt.v[static_cast<size_t>(k)]);
      for (const auto& th : ocp.theta_vertices)
        for (int i = 0; i < nx; ++i)
          chk.max_filter = std::max(
              chk.max_filter,
              filter_lhs(k, i, th, lins[static_cast<size_t>(k)].theta, Fth,
                         model.E, spec.mu.mu, pt.resp) -
                  pt.resp.sigma[static_cast<size_t>(k)][i]);
      chk.max_tau = std::max(chk.max_tau, tau_lhs(pt.resp, k) - pt.resp.tau[k]);
    }
    if (spec.performance)
      chk.max_perf = perf_lhs(*spec.performance, pt.resp) -
                     spec.performance->gamma;
  }

  for (int k = 0; k < T; ++k)
    for (const auto& sc : spec.constraints)
      chk.max_tighten = std::max(
          chk.max_tighten,
          tighten_lhs(sc.c, sc.b, pt.z[static_cast<size_t>(k)],
                      pt.v[static_cast<size_t>(k)], pt.resp, resp ? k : 0));
  for (const auto& tc : spec.terminal)
    chk.max_tighten =
        std::max(chk.max_tighten,
                 resp ? tighten_terminal_lhs(tc.c, tc.b, pt.z.back(), pt.resp)
                      : tc.c.dot(pt.z.back()) + tc.b);
  return chk;
}

OcpSolution solve_ocp(const OcpSpec& spec, const SolverConfig& cfg) {
  Ocp ocp = assemble(spec);
  InitialGuess ig = initial_guess(ocp, cfg);
  OcpSolution sol;
  if (spec.mode != OcpMode::nominal &&
      ig.nominal_report.status == SolveReport::Status::infeasible) {
    sol.point = unpack(ocp.layout, ig.beta);
    sol.report = ig.nominal_report;
    sol.K = CausalOperator(spec.T, spec.model.nu, spec.model.nx);
    sol.nominal_cost = nominal_cost(spec, sol.point.z, sol.point.v);
    return sol;
  }
  auto [beta, rep] = solve(ocp.nlp, cfg, ig.beta);
  sol.point = unpack(ocp.layout, beta);
  sol.report = rep;
  sol.nominal_cost = nominal_cost(spec, sol.point.z, sol.point.v);
  sol.K = CausalOperator(spec.T, spec.model.nu, spec.model.nx);
  if (rep.status == SolveReport::Status::optimal) {
    sol.check = verify_kernels(ocp, sol.point);
    if (!sol.check.ok(1e-6)) {
      sol.report.status = SolveReport::Status::numerical;
    } else if (ocp.layout.has_response()) {
      try {
        sol.K = recover_gains(sol.point.resp);
      } catch (const NumericalError&) {
        sol.report.status = SolveReport::Status::numerical;
      }
    }
  }
  return sol;
}

}  // namespace rsls
