#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "topopt/mesh.hpp"

namespace topopt {

// Cone-kernel density filter over active elements: weight(i,j) = max(r_min - d_ij, 0),
// rows normalized to sum 1. Distances are centroid Euclidean distances measured in
// element-size units of the mesh the operator is built on.
struct FilterOperator {
  double r_min = 0.0;
  Eigen::SparseMatrix<double> weights;  // n_active x n_active, row-stochastic
};

FilterOperator build_filter(const Mesh& mesh, double r_min);

// rho_hat = W rho
Eigen::VectorXd apply_filter(const FilterOperator& op, const Eigen::VectorXd& rho);

// W^T g (adjoint, used when chaining sensitivities back to raw densities)
Eigen::VectorXd apply_filter_transpose(const FilterOperator& op, const Eigen::VectorXd& g);

// Smoothed Heaviside projection
//   rho_bar = [tanh(b*tau) + tanh(b*(rho_hat - tau))] / [tanh(b*tau) + tanh(b*(1 - tau))]
// Maps 0 -> 0 and 1 -> 1 exactly; monotone increasing in rho_hat. tau may vary per element.
Eigen::VectorXd heaviside(const Eigen::VectorXd& rho_hat, double beta, double tau);
Eigen::VectorXd heaviside(const Eigen::VectorXd& rho_hat, double beta,
                          const Eigen::VectorXd& tau);

// d(rho_bar)/d(rho_hat) = beta * sech^2(beta*(rho_hat - tau)) / [tanh(b*tau) + tanh(b*(1-tau))]
Eigen::VectorXd heaviside_derivative(const Eigen::VectorXd& rho_hat, double beta, double tau);
Eigen::VectorXd heaviside_derivative(const Eigen::VectorXd& rho_hat, double beta,
                                     const Eigen::VectorXd& tau);

// Force prescribed-solid slots to 1 (applied after projection, before assembly).
void apply_solid_override(const Mesh& mesh, Eigen::VectorXd& rho_bar);

// Zero entries at prescribed-solid slots (their densities are not design variables,
// so derivatives through the chain vanish there).
void zero_at_solid(const Mesh& mesh, Eigen::VectorXd& v);

// Mean of rho_bar over active elements (solid cells participate at their value, i.e. 1).
double volume_fraction(const Eigen::VectorXd& rho_bar);

// Chain a gradient w.r.t. rho_bar back to raw rho: W^T (dH .* g), dH zeroed at solid.
Eigen::VectorXd chain_to_raw(const Mesh& mesh, const FilterOperator& op,
                             const Eigen::VectorXd& dH, const Eigen::VectorXd& grad_rho_bar);

// Gradient of volume_fraction w.r.t. raw rho through the same chain.
Eigen::VectorXd volume_gradient(const Mesh& mesh, const FilterOperator& op,
                                const Eigen::VectorXd& dH);

// Block-average a fine raw density field onto a coarser mesh covering the same domain.
// fine nx, ny must be integer multiples of coarse nx, ny with a common ratio.
Eigen::VectorXd restrict_density(const Eigen::VectorXd& rho_fine, const Mesh& fine,
                                 const Mesh& coarse);

}  // namespace topopt
