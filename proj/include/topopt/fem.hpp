#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>
#include <memory>

#include "topopt/mesh.hpp"

namespace topopt {

using SpMat = Eigen::SparseMatrix<double>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

inline constexpr double kYoung = 1.0;
inline constexpr double kPoisson = 0.3;
inline constexpr double kSimpExponent = 3.0;
inline constexpr double kRhoMin = 1e-3;

// Plane-stress bilinear square element, closed-form integration.
Mat8 element_stiffness(double E, double nu);
const Mat8& element_stiffness_cached();  // E = 1, nu = 0.3

// K = sum over active elements of rho_bar_e^iota * K_e; solid elements enter at
// rho_bar = 1. rho_bar has one entry per active element. With apply_bc, fixed
// rows/columns are dropped and a unit diagonal keeps the matrix SPD.
SpMat assemble(const Mesh& mesh, const Eigen::VectorXd& rho_bar, double iota,
               bool apply_bc = true);

// Sparse SPD solve. Direct factorization by default; conjugate gradients above
// the cg_threshold DOF count (or on request).
class LinearSolver {
 public:
  enum class Method { auto_select, ldlt, cg };

  LinearSolver();
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  void factorize(const SpMat& K, const Mesh& mesh, Method method = Method::auto_select);
  // Zeroes F at fixed DOFs, solves, verifies the residual on free DOFs.
  Eigen::VectorXd solve(const Eigen::VectorXd& F) const;
  bool factorized() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ||K U - F|| / ||F|| with the residual accumulated in extended precision; plain
// double evaluation bottoms out at eps * ||K|| ||U|| / ||F||, which masks the true
// residual on very compliant designs.
double relative_residual(const SpMat& K, const Eigen::VectorXd& U, const Eigen::VectorXd& F);

double compliance(const Eigen::VectorXd& U, const Eigen::VectorXd& F);

// C = sum_e rho_bar_e^iota u_e' K_e u_e: equals U'F for exact solves and stays
// meaningful for reconstructed displacement estimates.
double compliance_from_elements(const Mesh& mesh, const Eigen::VectorXd& rho_bar,
                                double iota, const Eigen::VectorXd& U);

// dC/d(rho_bar_e) = -iota rho_bar_e^(iota-1) u_e' K_e u_e per active element;
// zero at solid elements (their density is frozen).
Eigen::VectorXd compliance_grad_rho_bar(const Mesh& mesh, const Eigen::VectorXd& rho_bar,
                                        double iota, const Eigen::VectorXd& U);

// Centroid Von-Mises stress per element (0 on passive), sigma = rho_bar^iota D eps.
Eigen::VectorXd von_mises(const Mesh& mesh, const Eigen::VectorXd& U,
                          const Eigen::VectorXd& rho_bar, double iota);

// Largest eigenvalue of a symmetric PSD operator by power iteration.
double power_iteration_sym(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                           int dim, double tol = 1e-6, int max_iters = 500);
double sigma_max(const SpMat& K, double tol = 1e-6, int max_iters = 500);
// sigma_max of dK/d(rho_bar_e) = iota rho_bar_e^(iota-1) K_e scattered at element e,
// with rows/columns of fixed DOFs removed.
double sigma_max_stiffness_derivative(const Mesh& mesh, const Eigen::VectorXd& rho_bar,
                                      double iota, int active_slot);

}  // namespace topopt
