#pragma once

#include <Eigen/Core>

#include "topopt/mesh.hpp"

namespace topopt {

enum class SupportKind { top_edge_load_nodes, element_centroids };

// Truncated Karhunen-Loeve model of a Gaussian-kernel random field on unit-square
// coordinates: Z(x,p) = gamma0 + sum_i sqrt(lambda_i) * mode_i(x) * p_i, p_i in [-1,1].
// Modes are eigendecomposed once on the fine support and interpolated to coarser
// resolutions so every resolution sees the same realization.
struct KLModel {
  double lc = 0.0;
  int n_M = 0;
  double gamma0 = 0.0;
  SupportKind support = SupportKind::top_edge_load_nodes;
  Eigen::VectorXd lambdas;  // descending, >= 0
  Eigen::MatrixXd modes;    // support_size x n_M, orthonormal columns on the fine grid
  Eigen::MatrixXd coords;   // support_size x 2, unit coordinates
  int grid_nx = 0, grid_ny = 0;  // support grid dims (top edge: grid_nx+1 nodes)
  double energy_ratio = 0.0;     // sum_{i<=n_M} sqrt(l_i) / sum_{i<=min(100,N)} sqrt(l_i)
};

// R(i,j) = exp(-||x_i - x_j||^2 / (2 lc^2)) on the given points (rows of coords).
Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& coords, double lc);

// Top-n_M eigenpairs of a symmetric covariance matrix, eigenvalues descending and
// clamped at zero; mode signs fixed so the largest-magnitude entry is positive.
void kl_decompose(const Eigen::MatrixXd& R, int n_M, Eigen::VectorXd& lambdas,
                  Eigen::MatrixXd& modes, double& energy_ratio);

// Load field support: the fine mesh's nx+1 top-edge nodes at unit x = i/nx.
KLModel build_load_model(int fine_nx, double lc, int n_M, double gamma0);

// Threshold field support: all fine nx*ny element centroids (full rectangle grid,
// row-major; L-shaped domains mask out the void region downstream).
KLModel build_threshold_model(int fine_nx, int fine_ny, double lc, int n_M, double gamma0);

// Same model re-supported on a coarser grid via linear/bilinear interpolation of the
// fine-grid modes (lambdas, gamma0, energy_ratio unchanged).
KLModel interpolate_model(const KLModel& model, int target_nx, int target_ny);

// Z at every support point of the model.
Eigen::VectorXd evaluate_field(const KLModel& model, const Eigen::VectorXd& p);

// Per-support-point projection threshold: Z is standardized by its pointwise standard
// deviation sqrt(sum_i lambda_i mode_i(x)^2 / 3), pushed through the standard normal CDF,
// rescaled to [-1,1], and mapped affinely: tau = a1 * (2 Phi(Z') - 1) + a2.
Eigen::VectorXd threshold_field(const KLModel& model, const Eigen::VectorXd& p, double a1,
                                double a2);

// Nodal load vector: deterministic downward traction f2 plus random horizontal traction
// Z(x,p), both lumped trapezoidally onto the top-edge nodes (end nodes half weight,
// scaled by physical node spacing).
Eigen::VectorXd load_vector(const Mesh& mesh, const KLModel& model, const Eigen::VectorXd& p,
                            double f2);

}  // namespace topopt
