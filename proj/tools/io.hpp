#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "rsls/ocp.hpp"
#include "rsls/remainder.hpp"
#include "rsls/simulate.hpp"

namespace rsls_cli {

// Configuration or input-file problem: maps to process exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

// How the curvature constants are obtained for a run.
enum class MuSource { values, estimate, file };

struct RunConfig {
  rsls::OcpSpec spec;  // model, horizon, constraints, cost, performance, mode
  rsls::SolverConfig solver;

  MuSource mu_source = MuSource::estimate;
  Eigen::VectorXd mu_values;       // when source = values
  std::string mu_path;             // when source = file
  std::int64_t mu_samples = 100000;
  double mu_safety = 1.0;
  std::uint64_t mu_seed = 1;
  rsls::ParamBox mu_domain;        // (nx+nu)-box the curvature is sampled over

  unsigned seed = 0;               // sampling seed for verification
  std::string out_dir = "out";
};

// Parses and validates a config file. Unknown keys anywhere are rejected.
RunConfig load_config(const std::string& path);

// Parses --mode values: "robust", "nominal", or "offline:FRACTION".
void apply_mode(RunConfig& cfg, const std::string& mode);

// Fills cfg.spec.mu from the configured source (possibly running the
// curvature estimation).
rsls::MuBound resolve_mu(RunConfig& cfg);

// JSON <-> Eigen helpers (nested arrays, row-major).
nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& M);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& what);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what);

nlohmann::json to_json(const rsls::CausalOperator& M);
rsls::CausalOperator causal_from_json(const nlohmann::json& j,
                                      const std::string& what);

// Everything verify/decompose need to resume from a solve artifact.
struct SolutionFile {
  std::string mode;
  double offline_fraction = 0.0;
  std::string status;
  double nominal_cost = 0.0;
  rsls::SlsSolution sol;
  Eigen::VectorXd mu;
  Eigen::MatrixXd effective_E;  // generator matrix after mode adjustment
  std::vector<Eigen::VectorXd> theta_vertices;
};

nlohmann::json solution_to_json(const RunConfig& cfg, const rsls::Ocp& ocp,
                                const rsls::OcpSolution& sol);
SolutionFile solution_from_json(const nlohmann::json& j);

nlohmann::json mu_to_json(const rsls::MuBound& mu);
Eigen::VectorXd mu_from_json(const nlohmann::json& j);

void write_text(const std::string& path, const std::string& text);
nlohmann::json read_json(const std::string& path);

// trajectory.csv: header "k,x0,..,u0,.."; rows k = 0..T, input columns
// ignored on the last row.
void read_trajectory_csv(const std::string& path, int nx, int nu,
                         std::vector<Eigen::VectorXd>& xs,
                         std::vector<Eigen::VectorXd>& us);

std::string rollout_csv(const rsls::RolloutResult& r, const rsls::Tube& tube);

}  // namespace rsls_cli
