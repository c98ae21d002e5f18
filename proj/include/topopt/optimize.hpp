#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "topopt/bifidelity.hpp"
#include "topopt/problem.hpp"
#include "topopt/sampling.hpp"

namespace topopt {

struct Moments {
  double mu = 0.0;
  double sigma = 0.0;
};

// mu = sum w_i C_i, sigma = sqrt(sum w_i C_i^2 - mu^2); tiny negative radicands are
// clamped, larger ones clamped with a warning (signed sparse-grid weights).
Moments compute_moments(const Eigen::VectorXd& C, const Eigen::VectorXd& w);

// d(sigma)/d(rho) = (grad_cc - mu * grad_mu) / sigma, zeroed when sigma underflows.
Eigen::VectorXd sigma_gradient(double mu, double sigma, const Eigen::VectorXd& grad_mu,
                               const Eigen::VectorXd& grad_cc);

struct OcParams {
  double vbar = 0.5;
  double move = 0.2;
  double eta = 0.5;
  double rho_min = kRhoMin;
  double vol_tol = 1e-4;
};

struct OcResult {
  Eigen::VectorXd rho;
  double volume = 0.0;
  double change = 0.0;
  double lagrange = 0.0;
};

// Multiplicative optimality-criteria update with the Lagrange multiplier bisected on
// [1e-9, 1e9] until volume_of(candidate) meets vbar within vol_tol. Only design_slots
// move; positive objective-gradient components are clamped to -1e-10 first.
OcResult oc_update(const Eigen::VectorXd& rho, const Eigen::VectorXd& grad_Q,
                   const Eigen::VectorXd& grad_V, const OcParams& prm,
                   const std::function<double(const Eigen::VectorXd&)>& volume_of,
                   const std::vector<int>& design_slots);

// Projected-gradient fallback: rho - s*(grad_Q + L*grad_V) with L bisected on volume.
OcResult gd_update(const Eigen::VectorXd& rho, const Eigen::VectorXd& grad_Q,
                   const Eigen::VectorXd& grad_V, const OcParams& prm,
                   const std::function<double(const Eigen::VectorXd&)>& volume_of,
                   const std::vector<int>& design_slots);

struct IterationRecord {
  int iter = 0;
  double Q = 0.0, mu = 0.0, sigma = 0.0, volume = 0.0, change = 0.0;
  int n_hi_solves = 0;
};

struct PhaseTimings {
  double coarse_solves_s = 0.0;
  double fine_solves_s = 0.0;
  double qr_s = 0.0;
  double lift_s = 0.0;
  double total_s = 0.0;
};

struct RunParams {
  double lambda = 0.0;
  double vbar = 0.5;
  double move = 0.2;
  double eta = 0.5;
  int max_iters = 500;
  double tol_change = 0.01;
  int n_important = -1;  // -1: numerical rank of the coarse snapshot matrix
  int probes = 3;
  bool certify = false;
  int certify_slot = -1;  // -1: element with largest |dC/drho_bar| on the first probe
  int reuse_important = 1;
  bool beta_continuation = false;
  bool gd_fallback = false;
};

struct RunResult {
  Eigen::VectorXd rho;  // final raw design
  std::vector<IterationRecord> history;
  std::vector<Certificate> certificates;
  PhaseTimings timings;
  int last_rank = 0;
  int last_n_important = 0;
  bool converged = false;
};

// Uniform vbar on design slots, 1 on prescribed-solid slots.
Eigen::VectorXd initial_design(const Mesh& mesh, double vbar);

// Every sample solved at the one resolution each iteration.
RunResult run_single_resolution(ResolutionModel& model, const RunParams& prm);

// Per iteration: restrict the design, solve all samples coarse, select important
// samples by pivoted QR, solve only those fine, lift the rest, update the fine design.
RunResult run_bifidelity(ResolutionModel& fine, ResolutionModel& coarse, const RunParams& prm);

struct SweepRow {
  int n = 0;
  double err_u = 0.0, err_C = 0.0, err_dC = 0.0;  // medians of relative errors
};

// Error-vs-n study at a fixed design (default: uniform vbar).
std::vector<SweepRow> sweep_important_count(ResolutionModel& fine, ResolutionModel& coarse,
                                            const Eigen::VectorXd& rho_raw, int n_max);

struct StressRow {
  std::string method;
  int n_hi = 0;
  double mean_err = 0.0, std_err = 0.0;
};

// Moment errors of the spatially averaged von Mises stress at a fixed design:
// bi-fidelity lifting with n_important fine solves vs plain Monte Carlo with
// mc_samples fine solves, both against a dense sparse-grid reference.
std::vector<StressRow> stress_study(ResolutionModel& fine, ResolutionModel& coarse,
                                    const Eigen::VectorXd& rho_raw,
                                    const SampleSet& quad_samples, int n_important,
                                    int mc_samples, std::uint64_t mc_seed, int ref_level);

}  // namespace topopt
