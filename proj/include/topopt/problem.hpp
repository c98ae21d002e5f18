#pragma once

#include <Eigen/Core>
#include <vector>

#include "topopt/design_field.hpp"
#include "topopt/fem.hpp"
#include "topopt/mesh.hpp"
#include "topopt/random_field.hpp"

namespace topopt {

enum class UncertaintyKind { none, loading, geometric };

struct ProblemSpec {
  UncertaintyKind uncertainty = UncertaintyKind::none;
  double f2 = 2.0;          // distributed vertical traction (rectangle top edge)
  double point_load = 1.0;  // tip load magnitude (L-bracket)
  double beta = 8.0;
  double tau = 0.5;  // deterministic projection threshold
  double iota = 3.0;
  double a1 = 0.1, a2 = 0.45;  // affine map from transformed field to tau
};

// One resolution of the parametric compliance problem: mesh + filter + realized
// uncertainty model, with per-design state (filtered/projected densities, stiffness
// factorization) and per-sample realization caches.
//
// Loading uncertainty keeps a single projected field and solves 1 + n_M basis loads
// per design; any sample's displacement is their linear combination. Geometric
// uncertainty projects a per-sample density field (sample-dependent threshold) and
// assembles/solves per sample.
class ResolutionModel {
 public:
  ResolutionModel(Mesh mesh_in, double filter_radius, const ProblemSpec& spec_in,
                  const KLModel* fine_field);

  Mesh mesh;
  FilterOperator filter;
  ProblemSpec spec;
  KLModel field;  // re-supported at this resolution; meaningful iff has_field
  bool has_field = false;

  void set_samples(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights);
  void set_beta(double beta);
  void set_design(const Eigen::VectorXd& rho_raw);

  int n_samples() const { return static_cast<int>(sample_points.rows()); }
  int n_modes() const { return has_field ? field.n_M : 0; }
  bool design_set() const { return design_ready; }

  // Parameter-independent piece of the load (distributed vertical / tip load).
  Eigen::VectorXd deterministic_load() const;
  // Full load at sample i.
  Eigen::VectorXd load_of(int i) const;

  // True displacement at sample i for the current design.
  Eigen::VectorXd solve_sample(int i);
  // dof x N matrix of all true sample displacements.
  Eigen::MatrixXd solve_all();

  const Eigen::VectorXd& rho_bar_of(int i) const;
  const Eigen::VectorXd& dH_of(int i) const;

  // Compliance of a (possibly approximate) displacement field under sample i's
  // stiffness, in element-sum form u^T K(rho_bar_i) u.
  double compliance_of(int i, const Eigen::VectorXd& u) const;
  // d(compliance)/d(rho_bar) at sample i for the given displacement field.
  Eigen::VectorXd grad_rho_bar_of(int i, const Eigen::VectorXd& u) const;

  // Quadrature-weighted expected volume fraction of the processed chain applied to a
  // candidate raw field (deterministic volume when the threshold is deterministic).
  double expected_volume_of_raw(const Eigen::VectorXd& candidate_raw) const;
  double expected_volume_current() const;
  // Gradient of the expected volume w.r.t. raw densities.
  Eigen::VectorXd volume_gradient_raw() const;

  // Chain a per-rho_bar gradient at sample i back to raw densities.
  Eigen::VectorXd chain_to_raw_of(int i, const Eigen::VectorXd& grad_rho_bar) const;

  // Stiffness at sample i's projected field, boundary conditions applied.
  SpMat assemble_at(int i) const;

  Eigen::MatrixXd sample_points;  // N x d
  Eigen::VectorXd sample_weights;

 private:
  void realize_samples();
  void require_design() const;

  bool design_ready = false;
  Eigen::VectorXd rho_raw_, rho_hat_;

  // loading / deterministic-threshold state
  Eigen::MatrixXd F_basis_;  // dof x (1 + n_M): deterministic + per-mode loads
  Eigen::VectorXd rho_bar_shared_, dH_shared_;
  LinearSolver solver_;
  Eigen::MatrixXd U_basis_;  // dof x (1 + n_M)

  // geometric state (per sample)
  std::vector<Eigen::VectorXd> tau_s_, tbt_s_, denom_s_;  // threshold caches
  std::vector<Eigen::VectorXd> rho_bar_s_, dH_s_;
  Eigen::VectorXd F_det_;

  bool per_sample_threshold() const {
    return spec.uncertainty == UncertaintyKind::geometric;
  }
};

}  // namespace topopt
