#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace topopt {

// Normalized dot product <a,b> = a^T b / dim used for all snapshot geometry.
double inner_product(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double h_norm(const Eigen::VectorXd& a);

// Column-pivoted QR ranking of snapshot columns. `pivots` is the full pivot order
// (most important first); the first `n` entries are the selected set. `r_diag`
// holds |R_kk| magnitudes and `rank` counts those above 1e-12 * |R_11|.
struct ImportantSet {
  std::vector<int> pivots;
  int n = 0;
  Eigen::VectorXd r_diag;
  int rank = 0;
  bool budget_exceeds_rank = false;
};

ImportantSet select_important(const Eigen::MatrixXd& U, int n);

// Symmetric eigendecomposition of a Gramian G_ij = <col_i, col_j> with pseudo-inverse
// application; eigenvalues below 1e-12 * sigma_max are truncated.
struct GramianFactor {
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  double sigma_max = 0.0;
  bool truncated = false;

  Eigen::VectorXd solve(const Eigen::VectorXd& f) const;
};

Eigen::MatrixXd gramian_matrix(const Eigen::MatrixXd& cols);
GramianFactor build_gramian(const Eigen::MatrixXd& cols);

// Coefficients c with G c = f, f_i = <basis_i, target>.
Eigen::VectorXd interpolation_coeffs(const GramianFactor& G, const Eigen::MatrixXd& basis,
                                     const Eigen::VectorXd& target);

// Linear reconstruction sum_j c_j * basis_j.
Eigen::VectorXd lift(const Eigen::MatrixXd& basis, const Eigen::VectorXd& c);

// Error certificate from probe samples (the first unimportant pivots): epsilon bounds
// the coefficient gap, delta the projection-to-interpolation ratio, and the three
// bounds dominate the displacement / compliance / per-element sensitivity errors
// measured in the normalized inner product. `actual_*` are the measured maxima.
struct Certificate {
  double epsilon = 0.0;
  double delta = 0.0;
  double sigma_max_GH = 0.0;
  double bound_u = 0.0, bound_C = 0.0, bound_dC = 0.0;
  double actual_u = 0.0, actual_C = 0.0, actual_dC = 0.0;
  std::vector<int> probe_samples;
};

struct CertifyHooks {
  // True fine-resolution displacement at sample index i.
  std::function<Eigen::VectorXd(int)> solve_fine;
  // Compliance (element-sum form, divided by dof count) at sample i.
  std::function<double(int, const Eigen::VectorXd&)> compliance;
  // Per-element compliance sensitivity at sample i for the designated element,
  // divided by dof count.
  std::function<double(int, const Eigen::VectorXd&)> sensitivity_elem;
  double sigma_max_K = 0.0;
  double sigma_max_dK = 0.0;
};

Certificate certify(const Eigen::MatrixXd& U_L, const ImportantSet& imp,
                    const Eigen::MatrixXd& U_H_imp, int probe_budget,
                    const CertifyHooks& hooks);

}  // namespace topopt
