#include "io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace rsls_cli {

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) { ok = true; break; }
    if (!ok)
      throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
  }
}

double require_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + ": expected a number");
  return j.get<double>();
}

// Scalar s means s * I(n); otherwise an explicit matrix.
Eigen::MatrixXd weight_from_json(const json& j, int n, const std::string& what) {
  if (j.is_number())
    return j.get<double>() * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd M = matrix_from_json(j, what);
  if (M.rows() != n || M.cols() != n)
    throw ConfigError(what + ": expected " + std::to_string(n) + "x" +
                      std::to_string(n));
  return M;
}

void add_box_rows(std::vector<rsls::StageConstraint>& rows, int dim, int offset,
                  int total, double bound) {
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(total);
    c[offset + i] = 1.0;
    rows.push_back({c, -bound});
    rows.push_back({-c, -bound});
  }
}

}  // namespace

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_json(const Eigen::MatrixXd& M) {
  json out = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i)
    v[i] = require_number(j[static_cast<size_t>(i)], what);
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(what + ": expected an array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<size_t>(r)];
    if (static_cast<int>(row.size()) != cols)
      throw ConfigError(what + ": ragged rows");
    for (int c = 0; c < cols; ++c)
      M(r, c) = require_number(row[static_cast<size_t>(c)], what);
  }
  return M;
}

json to_json(const rsls::CausalOperator& M) {
  json rows = json::array();
  for (int k = 0; k < M.T(); ++k) {
    json row = json::array();
    for (int j = 0; j <= k; ++j) row.push_back(to_json(M.block(k, j)));
    rows.push_back(row);
  }
  return json{{"T", M.T()}, {"p", M.p()}, {"q", M.q()}, {"blocks", rows}};
}

rsls::CausalOperator causal_from_json(const json& j, const std::string& what) {
  check_keys(j, what, {"T", "p", "q", "blocks"});
  rsls::CausalOperator M(j.at("T").get<int>(), j.at("p").get<int>(),
                         j.at("q").get<int>());
  const auto& rows = j.at("blocks");
  if (static_cast<int>(rows.size()) != M.T())
    throw ConfigError(what + ": wrong block-row count");
  for (int k = 0; k < M.T(); ++k) {
    const auto& row = rows[static_cast<size_t>(k)];
    if (static_cast<int>(row.size()) != k + 1)
      throw ConfigError(what + ": wrong delay count in row " + std::to_string(k));
    for (int d = 0; d <= k; ++d)
      M.block(k, d) = matrix_from_json(row[static_cast<size_t>(d)], what);
  }
  return M;
}

RunConfig load_config(const std::string& path) {
  json j = read_json(path);
  check_keys(j, "config",
             {"schema_version", "model", "horizon", "initial_state",
              "constraints", "cost", "mu", "performance", "solver", "mode",
              "seed", "out_dir"});
  if (!j.contains("schema_version") ||
      j.at("schema_version").get<int>() != kSchemaVersion)
    throw ConfigError("config: schema_version must be " +
                      std::to_string(kSchemaVersion));

  RunConfig cfg;

  const json& jm = j.at("model");
  check_keys(jm, "model",
             {"id", "mass", "arm", "delta_bound", "step_size", "substeps"});
  if (jm.at("id").get<std::string>() != "satellite")
    throw ConfigError("model.id: only \"satellite\" is bundled");
  rsls::Discretizer disc;
  disc.h = jm.value("step_size", 0.5);
  disc.substeps = jm.value("substeps", 10);
  if (disc.h <= 0 || disc.substeps < 1)
    throw ConfigError("model: step_size must be > 0 and substeps >= 1");
  cfg.spec.model = rsls::satellite_model(
      jm.value("mass", 1.0), jm.value("arm", 1.0), jm.value("delta_bound", 0.01),
      disc);
  const int nx = cfg.spec.model.nx, nu = cfg.spec.model.nu;

  cfg.spec.T = j.at("horizon").get<int>();
  if (cfg.spec.T < 1) throw ConfigError("horizon: must be >= 1");
  cfg.spec.xbar = vector_from_json(j.at("initial_state"), "initial_state");
  if (cfg.spec.xbar.size() != nx)
    throw ConfigError("initial_state: wrong length");

  const json& jc = j.at("constraints");
  check_keys(jc, "constraints",
             {"state_box", "input_box", "terminal_box", "stage", "terminal"});
  if (jc.contains("state_box"))
    add_box_rows(cfg.spec.constraints, nx, 0, nx + nu,
                 require_number(jc.at("state_box"), "constraints.state_box"));
  if (jc.contains("input_box"))
    add_box_rows(cfg.spec.constraints, nu, nx, nx + nu,
                 require_number(jc.at("input_box"), "constraints.input_box"));
  if (jc.contains("stage"))
    for (const auto& row : jc.at("stage")) {
      check_keys(row, "constraints.stage[]", {"c", "b"});
      Eigen::VectorXd c = vector_from_json(row.at("c"), "constraints.stage[].c");
      if (c.size() != nx + nu)
        throw ConfigError("constraints.stage[].c: wrong length");
      cfg.spec.constraints.push_back(
          {c, require_number(row.at("b"), "constraints.stage[].b")});
    }
  if (jc.contains("terminal_box")) {
    const double b =
        require_number(jc.at("terminal_box"), "constraints.terminal_box");
    for (int i = 0; i < nx; ++i) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(nx);
      c[i] = 1.0;
      cfg.spec.terminal.push_back({c, -b});
      cfg.spec.terminal.push_back({-c, -b});
    }
  }
  if (jc.contains("terminal"))
    for (const auto& row : jc.at("terminal")) {
      check_keys(row, "constraints.terminal[]", {"c", "b"});
      Eigen::VectorXd c =
          vector_from_json(row.at("c"), "constraints.terminal[].c");
      if (c.size() != nx)
        throw ConfigError("constraints.terminal[].c: wrong length");
      cfg.spec.terminal.push_back(
          {c, require_number(row.at("b"), "constraints.terminal[].b")});
    }
  if (cfg.spec.constraints.empty())
    throw ConfigError("constraints: at least one stage constraint required");

  const json& jk = j.at("cost");
  check_keys(jk, "cost", {"Q", "R", "Qf", "lambda"});
  cfg.spec.Q = weight_from_json(jk.at("Q"), nx, "cost.Q");
  cfg.spec.R = weight_from_json(jk.at("R"), nu, "cost.R");
  cfg.spec.Qf = jk.contains("Qf") ? weight_from_json(jk.at("Qf"), nx, "cost.Qf")
                                  : cfg.spec.Q;
  cfg.spec.lambda = jk.value("lambda", 1e-6);

  const json& ju = j.at("mu");
  check_keys(ju, "mu",
             {"source", "values", "path", "n_samples", "safety", "seed",
              "domain"});
  const std::string src = ju.value("source", "estimate");
  if (src == "values") {
    cfg.mu_source = MuSource::values;
    cfg.mu_values = vector_from_json(ju.at("values"), "mu.values");
    if (cfg.mu_values.size() != nx) throw ConfigError("mu.values: wrong length");
  } else if (src == "file") {
    cfg.mu_source = MuSource::file;
    cfg.mu_path = ju.at("path").get<std::string>();
  } else if (src == "estimate") {
    cfg.mu_source = MuSource::estimate;
  } else {
    throw ConfigError("mu.source: expected values|file|estimate");
  }
  cfg.mu_samples = ju.value("n_samples", std::int64_t{100000});
  cfg.mu_safety = ju.value("safety", 1.0);
  cfg.mu_seed = ju.value("seed", std::uint64_t{1});
  if (ju.contains("domain")) {
    check_keys(ju.at("domain"), "mu.domain", {"lower", "upper"});
    cfg.mu_domain = rsls::ParamBox(
        vector_from_json(ju.at("domain").at("lower"), "mu.domain.lower"),
        vector_from_json(ju.at("domain").at("upper"), "mu.domain.upper"));
  } else {
    cfg.mu_domain = rsls::ParamBox::centered(Eigen::VectorXd::Ones(nx + nu));
  }
  if (cfg.mu_domain.dim() != nx + nu)
    throw ConfigError("mu.domain: wrong dimension");

  if (j.contains("performance")) {
    check_keys(j.at("performance"), "performance", {"gamma"});
    rsls::PerformanceSpec perf;
    perf.C = rsls::CausalOperator::identity(cfg.spec.T, nx);
    perf.D = rsls::CausalOperator(cfg.spec.T, nx, nu);
    perf.gamma =
        require_number(j.at("performance").at("gamma"), "performance.gamma");
    cfg.spec.performance = perf;
  }

  if (j.contains("solver")) {
    const json& js = j.at("solver");
    check_keys(js, "solver",
               {"max_iter", "tol_kkt", "tol_feas", "rho_init", "rho_growth",
                "rho_max", "stall_limit", "verbose"});
    cfg.solver.max_iter = js.value("max_iter", cfg.solver.max_iter);
    cfg.solver.tol_kkt = js.value("tol_kkt", cfg.solver.tol_kkt);
    cfg.solver.tol_feas = js.value("tol_feas", cfg.solver.tol_feas);
    cfg.solver.rho_init = js.value("rho_init", cfg.solver.rho_init);
    cfg.solver.rho_growth = js.value("rho_growth", cfg.solver.rho_growth);
    cfg.solver.rho_max = js.value("rho_max", cfg.solver.rho_max);
    cfg.solver.stall_limit = js.value("stall_limit", cfg.solver.stall_limit);
    cfg.solver.verbose = js.value("verbose", cfg.solver.verbose);
  }

  if (j.contains("mode")) apply_mode(cfg, j.at("mode").get<std::string>());
  cfg.seed = j.value("seed", 0u);
  cfg.out_dir = j.value("out_dir", std::string("out"));
  return cfg;
}

void apply_mode(RunConfig& cfg, const std::string& mode) {
  if (mode == "robust") {
    cfg.spec.mode = rsls::OcpMode::robust;
  } else if (mode == "nominal") {
    cfg.spec.mode = rsls::OcpMode::nominal;
  } else if (mode.rfind("offline:", 0) == 0) {
    cfg.spec.mode = rsls::OcpMode::offline;
    try {
      cfg.spec.offline_fraction = std::stod(mode.substr(8));
    } catch (const std::exception&) {
      throw ConfigError("mode: bad offline fraction in \"" + mode + "\"");
    }
    if (cfg.spec.offline_fraction < 0.0 || cfg.spec.offline_fraction > 1.0)
      throw ConfigError("mode: offline fraction must be in [0, 1]");
  } else {
    throw ConfigError("mode: expected robust|nominal|offline:FRACTION");
  }
}

rsls::MuBound resolve_mu(RunConfig& cfg) {
  rsls::MuBound mu;
  switch (cfg.mu_source) {
    case MuSource::values:
      mu.mu = cfg.mu_values;
      mu.meta.domain = "configured values";
      break;
    case MuSource::file:
      mu.mu = mu_from_json(read_json(cfg.mu_path));
      mu.meta.domain = "file:" + cfg.mu_path;
      break;
    case MuSource::estimate:
      mu = rsls::estimate_mu(cfg.spec.model, cfg.mu_domain,
                             cfg.spec.model.Theta, cfg.mu_samples,
                             cfg.mu_safety, cfg.mu_seed);
      break;
  }
  if (mu.mu.size() != cfg.spec.model.nx || (mu.mu.array() < 0).any())
    throw ConfigError("mu: expected " + std::to_string(cfg.spec.model.nx) +
                      " nonnegative entries");
  cfg.spec.mu = mu;
  return mu;
}

json solution_to_json(const RunConfig& cfg, const rsls::Ocp& ocp,
                      const rsls::OcpSolution& sol) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["mode"] = cfg.spec.mode == rsls::OcpMode::robust    ? "robust"
              : cfg.spec.mode == rsls::OcpMode::nominal ? "nominal"
                                                        : "offline";
  j["offline_fraction"] = cfg.spec.offline_fraction;
  j["report"] = {{"status", rsls::to_string(sol.report.status)},
                 {"objective", sol.report.objective},
                 {"kkt_residual", sol.report.kkt_residual},
                 {"violation", sol.report.violation},
                 {"iterations", sol.report.iterations},
                 {"wall_time_s", sol.report.wall_time_s}};
  j["nominal_cost"] = sol.nominal_cost;
  j["kernel_check"] = {{"max_eq", sol.check.max_eq},
                       {"max_filter", sol.check.max_filter},
                       {"max_tighten", sol.check.max_tighten},
                       {"max_tau", sol.check.max_tau},
                       {"max_perf", sol.check.max_perf}};
  json z = json::array(), v = json::array(), sigma = json::array();
  for (const auto& zk : sol.point.z) z.push_back(to_json(zk));
  for (const auto& vk : sol.point.v) v.push_back(to_json(vk));
  for (const auto& sk : sol.point.resp.sigma) sigma.push_back(to_json(sk));
  j["z"] = z;
  j["v"] = v;
  j["sigma"] = sigma;
  j["tau"] = to_json(sol.point.resp.tau);
  j["phi_x"] = to_json(sol.point.resp.Phi_x);
  j["phi_u"] = to_json(sol.point.resp.Phi_u);
  if (sol.K.T() > 0) j["gains"] = to_json(sol.K);
  j["mu"] = to_json(cfg.spec.mu.mu);
  j["effective_E"] = to_json(ocp.model.E.E);
  json verts = json::array();
  for (const auto& th : ocp.theta_vertices) verts.push_back(to_json(th));
  j["theta_vertices"] = verts;
  rsls::Tube tube = rsls::tubes(sol.point.z, sol.point.v, sol.point.resp);
  json xhw = json::array(), uhw = json::array();
  for (const auto& w : tube.x_halfwidth) xhw.push_back(to_json(w));
  for (const auto& w : tube.u_halfwidth) uhw.push_back(to_json(w));
  j["tube"] = {{"x_halfwidth", xhw}, {"u_halfwidth", uhw}};
  return j;
}

SolutionFile solution_from_json(const json& j) {
  if (j.value("schema_version", -1) != kSchemaVersion)
    throw ConfigError("solution: schema_version must be " +
                      std::to_string(kSchemaVersion));
  SolutionFile f;
  f.mode = j.at("mode").get<std::string>();
  f.offline_fraction = j.value("offline_fraction", 0.0);
  f.status = j.at("report").at("status").get<std::string>();
  f.nominal_cost = j.at("nominal_cost").get<double>();
  for (const auto& zk : j.at("z"))
    f.sol.z.push_back(vector_from_json(zk, "solution.z"));
  for (const auto& vk : j.at("v"))
    f.sol.v.push_back(vector_from_json(vk, "solution.v"));
  for (const auto& sk : j.at("sigma"))
    f.sol.resp.sigma.push_back(vector_from_json(sk, "solution.sigma"));
  f.sol.resp.tau = vector_from_json(j.at("tau"), "solution.tau");
  f.sol.resp.Phi_x = causal_from_json(j.at("phi_x"), "solution.phi_x");
  f.sol.resp.Phi_u = causal_from_json(j.at("phi_u"), "solution.phi_u");
  if (j.contains("gains"))
    f.sol.K = causal_from_json(j.at("gains"), "solution.gains");
  f.mu = vector_from_json(j.at("mu"), "solution.mu");
  f.effective_E = matrix_from_json(j.at("effective_E"), "solution.effective_E");
  for (const auto& th : j.at("theta_vertices"))
    f.theta_vertices.push_back(vector_from_json(th, "solution.theta_vertices"));
  return f;
}

json mu_to_json(const rsls::MuBound& mu) {
  return json{{"schema_version", kSchemaVersion},
              {"mu", to_json(mu.mu)},
              {"meta",
               {{"samples", mu.meta.samples},
                {"safety", mu.meta.safety},
                {"seed", mu.meta.seed},
                {"domain", mu.meta.domain}}}};
}

Eigen::VectorXd mu_from_json(const json& j) {
  if (j.value("schema_version", -1) != kSchemaVersion)
    throw ConfigError("mu file: schema_version must be " +
                      std::to_string(kSchemaVersion));
  return vector_from_json(j.at("mu"), "mu file");
}

void write_text(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void read_trajectory_csv(const std::string& path, int nx, int nu,
                         std::vector<Eigen::VectorXd>& xs,
                         std::vector<Eigen::VectorXd>& us) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  xs.clear();
  us.clear();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ','))
      vals.push_back(cell.empty() ? 0.0 : std::stod(cell));
    if (static_cast<int>(vals.size()) < 1 + nx)
      throw ConfigError(path + ": row too short");
    Eigen::VectorXd x(nx);
    for (int i = 0; i < nx; ++i) x[i] = vals[static_cast<size_t>(1 + i)];
    xs.push_back(x);
    if (static_cast<int>(vals.size()) >= 1 + nx + nu) {
      Eigen::VectorXd u(nu);
      for (int i = 0; i < nu; ++i)
        u[i] = vals[static_cast<size_t>(1 + nx + i)];
      us.push_back(u);
    }
  }
  if (xs.size() < 2) throw ConfigError(path + ": need at least two states");
  // Inputs on the final row (if present) describe no transition.
  if (us.size() == xs.size()) us.pop_back();
  if (us.size() + 1 != xs.size())
    throw ConfigError(path + ": need an input for every transition");
}

std::string rollout_csv(const rsls::RolloutResult& r, const rsls::Tube& tube) {
  std::ostringstream out;
  const int nx = static_cast<int>(r.x[0].size());
  const int nu = r.u.empty() ? 0 : static_cast<int>(r.u[0].size());
  out << "k";
  for (int i = 0; i < nx; ++i) out << ",x" << i;
  for (int i = 0; i < nu; ++i) out << ",u" << i;
  for (int i = 0; i < nx; ++i) out << ",z" << i;
  for (int i = 0; i < nx; ++i) out << ",x_halfwidth" << i;
  out << "\n";
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  };
  for (size_t k = 0; k < r.x.size(); ++k) {
    out << k;
    for (int i = 0; i < nx; ++i) emit(r.x[k][i]);
    for (int i = 0; i < nu; ++i) emit(k < r.u.size() ? r.u[k][i] : 0.0);
    for (int i = 0; i < nx; ++i) emit(tube.z[k][i]);
    for (int i = 0; i < nx; ++i) emit(tube.x_halfwidth[k][i]);
    out << "\n";
  }
  return out.str();
}

}  // namespace rsls_cli
