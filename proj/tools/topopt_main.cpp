#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "topopt/errors.hpp"
#include "topopt/io.hpp"
#include "topopt/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Compliance topology optimization under uncertainty with bi-fidelity "
               "sample lifting and error certificates"};
  app.set_version_flag("--version", std::string(topopt::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int n_max = 13;
  int iter = 1;
  int mc_samples = 100;
  int ref_level = 6;

  CLI::App* c_run = app.add_subcommand("run", "Run one optimization and emit artifacts");
  c_run->add_option("--config", config_path, "JSON config file")->required();
  c_run->add_option("--out", out_dir, "Output directory (default: config output_dir)");

  CLI::App* c_sweep = app.add_subcommand(
      "sweep-n", "Error-vs-n study at the uniform initial design");
  c_sweep->add_option("--config", config_path, "JSON config file")->required();
  c_sweep->add_option("--n-max", n_max, "Largest important-sample count")->required();
  c_sweep->add_option("--out", out_dir, "Output directory (default: config output_dir)");

  CLI::App* c_cert = app.add_subcommand(
      "certify", "Run a fixed number of iterations with per-iteration certificates");
  c_cert->add_option("--config", config_path, "JSON config file")->required();
  c_cert->add_option("--iter", iter, "Number of iterations to certify")->required();
  c_cert->add_option("--out", out_dir, "Output directory (default: config output_dir)");

  CLI::App* c_stress = app.add_subcommand(
      "stress-study", "Moment errors of mean von Mises stress: lifted vs Monte Carlo");
  c_stress->add_option("--config", config_path, "JSON config file")->required();
  c_stress->add_option("--mc-samples", mc_samples, "Monte Carlo budget")->required();
  c_stress->add_option("--ref-level", ref_level, "Sparse level of the dense reference");
  c_stress->add_option("--out", out_dir, "Output directory (default: config output_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    topopt::RunConfig cfg = topopt::parse_config_file(config_path);
    const std::string out = out_dir.empty() ? cfg.output_dir : out_dir;
    if (c_run->parsed()) {
      topopt::cmd_run(cfg, out);
    } else if (c_sweep->parsed()) {
      topopt::cmd_sweep_n(cfg, n_max, out);
    } else if (c_cert->parsed()) {
      topopt::cmd_certify(cfg, iter, out);
    } else if (c_stress->parsed()) {
      topopt::cmd_stress_study(cfg, mc_samples, ref_level, out);
    }
    return 0;
  } catch (const topopt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const topopt::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
