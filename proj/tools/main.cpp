#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>

#include "io.hpp"

using nlohmann::json;
using namespace rsls_cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
  std::string config;
  std::string out;
  std::string mode;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool mode_flag = true) {
  cmd->add_option("--config", o.config, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory (overrides config)");
  cmd->add_option("--seed", o.seed, "sampling seed (overrides config)");
  if (mode_flag)
    cmd->add_option("--mode", o.mode,
                    "robust | nominal | offline:FRACTION (overrides config)");
}

RunConfig configure(const CommonOpts& o) {
  RunConfig cfg = load_config(o.config);
  if (!o.mode.empty()) apply_mode(cfg, o.mode);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.seed >= 0) cfg.seed = static_cast<unsigned>(o.seed);
  return cfg;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

int status_exit(rsls::SolveReport::Status s) {
  switch (s) {
    case rsls::SolveReport::Status::optimal: return kExitOk;
    case rsls::SolveReport::Status::infeasible: return kExitInfeasible;
    default: return kExitNumerical;
  }
}

int cmd_solve(const CommonOpts& o) {
  RunConfig cfg = configure(o);
  resolve_mu(cfg);
  rsls::Ocp ocp = rsls::assemble(cfg.spec);
  rsls::OcpSolution sol = rsls::solve_ocp(cfg.spec, cfg.solver);
  write_text(join(cfg.out_dir, "solution.json"),
             solution_to_json(cfg, ocp, sol).dump(2) + "\n");
  std::printf("solve: %s  nominal cost %.6f  iters %d  wall %.2fs\n",
              rsls::to_string(sol.report.status), sol.nominal_cost,
              sol.report.iterations, sol.report.wall_time_s);
  return status_exit(sol.report.status);
}

int cmd_table1(const CommonOpts& o) {
  RunConfig cfg = configure(o);
  resolve_mu(cfg);
  struct Row {
    std::string label;
    rsls::OcpMode mode;
    double fraction;
  };
  const std::vector<Row> rows = {{"robust", rsls::OcpMode::robust, 0.0},
                                 {"offline-60%", rsls::OcpMode::offline, 0.60},
                                 {"offline-50%", rsls::OcpMode::offline, 0.50},
                                 {"offline-25%", rsls::OcpMode::offline, 0.25},
                                 {"offline-0%", rsls::OcpMode::offline, 0.0}};
  std::string csv = "mode,fraction,status,cost,iterations,wall_time_s\n";
  bool numerical = false;
  for (const Row& row : rows) {
    rsls::OcpSpec spec = cfg.spec;
    spec.mode = row.mode;
    spec.offline_fraction = row.fraction;
    rsls::OcpSolution sol = rsls::solve_ocp(spec, cfg.solver);
    const bool ok = sol.report.status == rsls::SolveReport::Status::optimal;
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.2f,%s,%s,%d,%.3f\n",
                  row.label.c_str(), row.fraction,
                  rsls::to_string(sol.report.status),
                  ok ? std::to_string(sol.nominal_cost).c_str() : "",
                  sol.report.iterations, sol.report.wall_time_s);
    csv += line;
    std::printf("%-12s %s%s%s\n", row.label.c_str(),
                rsls::to_string(sol.report.status), ok ? "  cost " : "",
                ok ? std::to_string(sol.nominal_cost).c_str() : "");
    if (sol.report.status != rsls::SolveReport::Status::optimal &&
        sol.report.status != rsls::SolveReport::Status::infeasible)
      numerical = true;
  }
  write_text(join(cfg.out_dir, "table.csv"), csv);
  return numerical ? kExitNumerical : kExitOk;
}

int cmd_verify(const CommonOpts& o, std::string solution_path, int runs) {
  RunConfig cfg = configure(o);
  if (solution_path.empty())
    solution_path = join(cfg.out_dir, "solution.json");
  SolutionFile f = solution_from_json(read_json(solution_path));
  if (static_cast<int>(f.sol.v.size()) != cfg.spec.T)
    throw ConfigError("verify: solution horizon does not match config");

  rsls::McSummary mc = rsls::monte_carlo_verify(cfg.spec.model, cfg.spec,
                                                f.sol, runs, cfg.seed);
  rsls::AdversarialResult adv =
      rsls::adversarial_search(cfg.spec.model, cfg.spec, f.sol);

  json j;
  j["schema_version"] = kSchemaVersion;
  j["runs"] = mc.n_runs;
  j["violations"] = mc.violations;
  j["tube_exits"] = mc.tube_exits;
  j["max_violation"] = mc.max_violation;
  j["max_tube_exceedance"] = mc.max_tube_exceedance;
  j["step_margin"] = mc.step_margin;
  j["adversarial"] = {{"peak", adv.peak},
                      {"violations", adv.rollout.violations},
                      {"theta", to_json(adv.theta)}};
  write_text(join(cfg.out_dir, "verify.json"), j.dump(2) + "\n");
  rsls::Tube tube = rsls::tubes(f.sol.z, f.sol.v, f.sol.resp);
  write_text(join(cfg.out_dir, "adversarial_rollout.csv"),
             rollout_csv(adv.rollout, tube));
  std::printf(
      "verify: %d runs, %d violations, %d tube exits; adversarial peak %.6f\n",
      mc.n_runs, mc.violations, mc.tube_exits, adv.peak);
  return kExitOk;
}

int cmd_estimate_mu(const CommonOpts& o) {
  RunConfig cfg = configure(o);
  if (o.seed >= 0) cfg.mu_seed = static_cast<std::uint64_t>(o.seed);
  rsls::MuBound mu =
      rsls::estimate_mu(cfg.spec.model, cfg.mu_domain, cfg.spec.model.Theta,
                        cfg.mu_samples, cfg.mu_safety, cfg.mu_seed);
  write_text(join(cfg.out_dir, "mu.json"), mu_to_json(mu).dump(2) + "\n");
  std::printf("mu:");
  for (int i = 0; i < mu.mu.size(); ++i) std::printf(" %.6f", mu.mu[i]);
  std::printf("\n");
  return kExitOk;
}

int cmd_decompose(const CommonOpts& o, std::string solution_path) {
  RunConfig cfg = configure(o);
  if (solution_path.empty())
    solution_path = join(cfg.out_dir, "solution.json");
  SolutionFile f = solution_from_json(read_json(solution_path));
  if (static_cast<int>(f.sol.v.size()) != cfg.spec.T)
    throw ConfigError("decompose: solution horizon does not match config");

  const rsls::BoxImageSet E{f.effective_E};
  std::string csv = "k,i,parametric,linearization,additive,sigma\n";
  for (int k = 0; k < cfg.spec.T; ++k) {
    const Eigen::VectorXd& zk = f.sol.z[static_cast<size_t>(k)];
    const Eigen::VectorXd& vk = f.sol.v[static_cast<size_t>(k)];
    rsls::Linearization lin = rsls::jacobians_fd(cfg.spec.model, zk, vk);
    const Eigen::MatrixXd Fth = cfg.spec.model.ftheta(zk, vk);
    for (int i = 0; i < cfg.spec.model.nx; ++i) {
      // Worst vertex of the (possibly collapsed) parameter set.
      rsls::FilterParts worst;
      double total = -1.0;
      for (const auto& th : f.theta_vertices) {
        rsls::FilterParts parts = rsls::decompose_filter(
            k, i, th, lin.theta, Fth, E, f.mu, f.sol.resp);
        if (parts.total() > total) {
          total = parts.total();
          worst = parts;
        }
      }
      char line[160];
      std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", k, i,
                    worst.parametric, worst.linearization, worst.additive,
                    f.sol.resp.sigma[static_cast<size_t>(k)][i]);
      csv += line;
    }
  }
  write_text(join(cfg.out_dir, "sigma_decomposition.csv"), csv);
  std::printf("decompose: wrote %s\n",
              join(cfg.out_dir, "sigma_decomposition.csv").c_str());
  return kExitOk;
}

int cmd_learn(const CommonOpts& o, const std::string& data_path) {
  RunConfig cfg = configure(o);
  const rsls::UncertainModel& model = cfg.spec.model;
  std::vector<Eigen::VectorXd> xs, us;
  read_trajectory_csv(data_path, model.nx, model.nu, xs, us);

  // Tightest axis-aligned box containing the disturbance image; a sound
  // (possibly loose) H-rep for generator matrices of any shape.
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(model.nx, model.nx);
  Eigen::MatrixXd H_w(2 * model.nx, model.nx);
  H_w << I, -I;
  const Eigen::VectorXd s = model.E.E.cwiseAbs().rowwise().sum();
  Eigen::VectorXd h_w(2 * model.nx);
  h_w << s, s;

  rsls::Polytope prior = rsls::as_polytope(model.Theta);
  rsls::Polytope post =
      rsls::set_membership_update(prior, H_w, h_w, model, xs, us);

  json j;
  j["schema_version"] = kSchemaVersion;
  j["transitions"] = us.size();
  j["H"] = to_json(post.H);
  j["h"] = to_json(post.h);
  bool falsified = false;
  if (post.dim() == 1) {
    try {
      auto [lo, hi] = rsls::interval_1d(post);
      j["interval"] = {lo, hi};
      j["width"] = hi - lo;
      std::printf("learn: theta in [%.6g, %.6g] from %zu transitions\n", lo, hi,
                  us.size());
    } catch (const rsls::NumericalError&) {
      falsified = true;
    }
  }
  j["falsified"] = falsified;
  write_text(join(cfg.out_dir, "theta_p.json"), j.dump(2) + "\n");
  if (falsified) {
    std::printf("learn: data falsifies the model (empty parameter set)\n");
    return kExitInfeasible;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Joint nominal-trajectory and error-feedback synthesis for uncertain "
      "nonlinear systems"};
  app.require_subcommand(1);

  CommonOpts solve_o, table_o, verify_o, mu_o, dec_o, learn_o;
  std::string verify_solution, dec_solution, learn_data;
  int verify_runs = 1000;

  add_common(app.add_subcommand("solve", "solve the configured instance"),
             solve_o);
  add_common(app.add_subcommand(
                 "table1", "robust vs offline-overbounded cost sweep"),
             table_o, false);
  CLI::App* verify = app.add_subcommand(
      "verify", "Monte-Carlo and adversarial check of a solved instance");
  add_common(verify, verify_o, false);
  verify->add_option("--solution", verify_solution,
                     "solution.json path (default: <out>/solution.json)");
  verify->add_option("--runs", verify_runs, "number of Monte-Carlo rollouts");
  add_common(app.add_subcommand("estimate-mu", "sample curvature constants"),
             mu_o, false);
  CLI::App* dec = app.add_subcommand(
      "decompose", "per-row uncertainty breakdown of the filter");
  add_common(dec, dec_o, false);
  dec->add_option("--solution", dec_solution,
                  "solution.json path (default: <out>/solution.json)");
  CLI::App* learn = app.add_subcommand(
      "learn", "non-falsified parameter set from trajectory data");
  add_common(learn, learn_o, false);
  learn->add_option("--data", learn_data, "trajectory CSV")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (app.got_subcommand("solve")) return cmd_solve(solve_o);
    if (app.got_subcommand("table1")) return cmd_table1(table_o);
    if (app.got_subcommand("verify"))
      return cmd_verify(verify_o, verify_solution, verify_runs);
    if (app.got_subcommand("estimate-mu")) return cmd_estimate_mu(mu_o);
    if (app.got_subcommand("decompose")) return cmd_decompose(dec_o, dec_solution);
    if (app.got_subcommand("learn")) return cmd_learn(learn_o, learn_data);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitConfig;
  } catch (const rsls::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitConfig;
}
