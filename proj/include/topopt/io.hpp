#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "topopt/config.hpp"
#include "topopt/optimize.hpp"

namespace topopt {

std::string format_g17(double v);  // 17 significant digits, locale-independent

// Plain PGM (P2), row 0 = top of the domain, value = round(255 * rho_bar),
// passive (void) elements written as 0.
void write_density_pgm(const Mesh& mesh, const Eigen::VectorXd& rho_bar_active,
                       const std::string& path);

void write_history_csv(const std::vector<IterationRecord>& history, const std::string& path);
// Certificates are paired positionally with history rows (one per logged iteration).
void write_certificate_csv(const std::vector<IterationRecord>& history,
                           const std::vector<Certificate>& certs, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
void write_stress_csv(const std::vector<StressRow>& rows, const std::string& path);
// Raw design variables, one active element per row: elem,ex,ey,rho.
void write_raw_density_csv(const Mesh& mesh, const Eigen::VectorXd& rho_raw,
                           const std::string& path);

// Mesh/field/sample assembly shared by all subcommands.
struct BuiltProblem {
  RunConfig cfg;
  std::unique_ptr<ResolutionModel> fine, coarse;  // coarse null when not configured
  SampleSet samples;
};

BuiltProblem build_problem(const RunConfig& cfg);
RunParams run_params_from(const RunConfig& cfg, const Mesh& fine_mesh);

// Subcommand drivers; artifacts land in out_dir (created if needed). Errors are
// reported by throwing ConfigError / NumericalError; the CLI maps them to exit codes.
void cmd_run(const RunConfig& cfg, const std::string& out_dir);
void cmd_sweep_n(const RunConfig& cfg, int n_max, const std::string& out_dir);
void cmd_certify(const RunConfig& cfg, int iter, const std::string& out_dir);
void cmd_stress_study(const RunConfig& cfg, int mc_samples, int ref_level,
                      const std::string& out_dir);

}  // namespace topopt
