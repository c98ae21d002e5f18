#include "topopt/problem.hpp"

#include <cmath>
#include <utility>

#include "topopt/errors.hpp"

namespace topopt {

ResolutionModel::ResolutionModel(Mesh mesh_in, double filter_radius, const ProblemSpec& spec_in,
                                 const KLModel* fine_field)
    : mesh(std::move(mesh_in)), spec(spec_in) {
  filter = build_filter(mesh, filter_radius);

  if (spec.uncertainty != UncertaintyKind::none) {
    if (fine_field == nullptr)
      throw ConfigError("ResolutionModel: uncertainty requested but no field model given");
    if (spec.uncertainty == UncertaintyKind::loading) {
      if (fine_field->support != SupportKind::top_edge_load_nodes)
        throw ConfigError("ResolutionModel: loading uncertainty needs a top-edge field");
      if (mesh.shape != DomainShape::rectangle)
        throw ConfigError("ResolutionModel: loading uncertainty requires the rectangle domain");
      field = fine_field->grid_nx == mesh.nx ? *fine_field
                                             : interpolate_model(*fine_field, mesh.nx, 0);
    } else {
      if (fine_field->support != SupportKind::element_centroids)
        throw ConfigError("ResolutionModel: geometric uncertainty needs a centroid field");
      field = (fine_field->grid_nx == mesh.nx && fine_field->grid_ny == mesh.ny)
                  ? *fine_field
                  : interpolate_model(*fine_field, mesh.nx, mesh.ny);
    }
    has_field = true;
  }

  if (spec.uncertainty == UncertaintyKind::loading) {
    Eigen::VectorXd p0 = Eigen::VectorXd::Zero(field.n_M);
    F_basis_.resize(mesh.dof_count(), 1 + field.n_M);
    F_basis_.col(0) = load_vector(mesh, field, p0, spec.f2);
    for (int j = 0; j < field.n_M; ++j) {
      Eigen::VectorXd ej = Eigen::VectorXd::Zero(field.n_M);
      ej(j) = 1.0;
      F_basis_.col(1 + j) = load_vector(mesh, field, ej, spec.f2) - F_basis_.col(0);
    }
  } else {
    F_det_ = deterministic_load();
    F_basis_.resize(mesh.dof_count(), 1);
    F_basis_.col(0) = F_det_;
  }
}

Eigen::VectorXd ResolutionModel::deterministic_load() const {
  Eigen::VectorXd F = Eigen::VectorXd::Zero(mesh.dof_count());
  if (mesh.shape == DomainShape::rectangle) {
    for (int i = 0; i <= mesh.nx; ++i) {
      double w = mesh.element_size * ((i == 0 || i == mesh.nx) ? 0.5 : 1.0);
      F(2 * mesh.node_id(i, mesh.ny) + 1) -= spec.f2 * w;
    }
  } else {
    F(2 * mesh.node_id(mesh.nx, 3 * mesh.ny / 5) + 1) -= spec.point_load;
  }
  return F;
}

void ResolutionModel::set_samples(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights) {
  if (points.cols() != n_modes())
    throw ConfigError("set_samples: sample dimension does not match mode count");
  if (weights.size() != points.rows()) throw ConfigError("set_samples: weight count mismatch");
  if (points.rows() < 1) throw ConfigError("set_samples: need at least one sample");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw ConfigError("set_samples: weights must sum to 1");
  sample_points = points;
  sample_weights = weights;
  realize_samples();
  design_ready = false;
}

void ResolutionModel::realize_samples() {
  if (!per_sample_threshold()) return;
  const int N = n_samples();
  tau_s_.assign(N, {});
  tbt_s_.assign(N, {});
  denom_s_.assign(N, {});
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd tau_full =
        threshold_field(field, sample_points.row(i).transpose(), spec.a1, spec.a2);
    Eigen::VectorXd tau(mesh.n_active());
    for (int slot = 0; slot < mesh.n_active(); ++slot) tau(slot) = tau_full(mesh.active_elems[slot]);
    tau_s_[i] = tau;
    tbt_s_[i] = (spec.beta * tau.array()).tanh();
    denom_s_[i] = tbt_s_[i].array() + (spec.beta * (1.0 - tau.array())).tanh();
  }
}

void ResolutionModel::set_beta(double beta) {
  if (beta <= 0) throw ConfigError("set_beta: beta must be > 0");
  spec.beta = beta;
  if (sample_points.rows() > 0) realize_samples();
  design_ready = false;
}

void ResolutionModel::set_design(const Eigen::VectorXd& rho_raw) {
  if (rho_raw.size() != mesh.n_active()) throw ConfigError("set_design: size mismatch");
  if (!rho_raw.allFinite()) throw NumericalError("set_design: NaN/inf in design");
  if (sample_points.rows() < 1) throw ConfigError("set_design: call set_samples first");
  rho_raw_ = rho_raw;
  rho_hat_ = apply_filter(filter, rho_raw);

  if (per_sample_threshold()) {
    const int N = n_samples();
    rho_bar_s_.assign(N, {});
    dH_s_.assign(N, {});
    for (int i = 0; i < N; ++i) {
      Eigen::VectorXd rb = heaviside(rho_hat_, spec.beta, tau_s_[i]);
      apply_solid_override(mesh, rb);
      Eigen::VectorXd dh = heaviside_derivative(rho_hat_, spec.beta, tau_s_[i]);
      zero_at_solid(mesh, dh);
      rho_bar_s_[i] = std::move(rb);
      dH_s_[i] = std::move(dh);
    }
  } else {
    rho_bar_shared_ = heaviside(rho_hat_, spec.beta, spec.tau);
    apply_solid_override(mesh, rho_bar_shared_);
    dH_shared_ = heaviside_derivative(rho_hat_, spec.beta, spec.tau);
    zero_at_solid(mesh, dH_shared_);
    SpMat K = assemble(mesh, rho_bar_shared_, spec.iota, true);
    solver_.factorize(K, mesh);
    U_basis_.resize(mesh.dof_count(), F_basis_.cols());
    for (int j = 0; j < F_basis_.cols(); ++j) U_basis_.col(j) = solver_.solve(F_basis_.col(j));
  }
  design_ready = true;
}

void ResolutionModel::require_design() const {
  if (!design_ready) throw NumericalError("ResolutionModel: design not set");
}

Eigen::VectorXd ResolutionModel::load_of(int i) const {
  if (i < 0 || i >= n_samples()) throw ConfigError("load_of: sample index out of range");
  if (spec.uncertainty == UncertaintyKind::loading) {
    Eigen::VectorXd c(1 + field.n_M);
    c(0) = 1.0;
    c.tail(field.n_M) = sample_points.row(i).transpose();
    return F_basis_ * c;
  }
  return F_det_;
}

Eigen::VectorXd ResolutionModel::solve_sample(int i) {
  require_design();
  if (i < 0 || i >= n_samples()) throw ConfigError("solve_sample: sample index out of range");
  if (per_sample_threshold()) {
    SpMat K = assemble(mesh, rho_bar_s_[i], spec.iota, true);
    LinearSolver s;
    s.factorize(K, mesh);
    return s.solve(F_det_);
  }
  if (spec.uncertainty == UncertaintyKind::loading) {
    Eigen::VectorXd c(1 + field.n_M);
    c(0) = 1.0;
    c.tail(field.n_M) = sample_points.row(i).transpose();
    return U_basis_ * c;
  }
  return U_basis_.col(0);
}

Eigen::MatrixXd ResolutionModel::solve_all() {
  require_design();
  Eigen::MatrixXd U(mesh.dof_count(), n_samples());
  for (int i = 0; i < n_samples(); ++i) U.col(i) = solve_sample(i);
  return U;
}

const Eigen::VectorXd& ResolutionModel::rho_bar_of(int i) const {
  require_design();
  return per_sample_threshold() ? rho_bar_s_.at(i) : rho_bar_shared_;
}

const Eigen::VectorXd& ResolutionModel::dH_of(int i) const {
  require_design();
  return per_sample_threshold() ? dH_s_.at(i) : dH_shared_;
}

double ResolutionModel::compliance_of(int i, const Eigen::VectorXd& u) const {
  return compliance_from_elements(mesh, rho_bar_of(i), spec.iota, u);
}

Eigen::VectorXd ResolutionModel::grad_rho_bar_of(int i, const Eigen::VectorXd& u) const {
  return compliance_grad_rho_bar(mesh, rho_bar_of(i), spec.iota, u);
}

double ResolutionModel::expected_volume_of_raw(const Eigen::VectorXd& candidate_raw) const {
  Eigen::VectorXd rh = apply_filter(filter, candidate_raw);
  const int n = mesh.n_active();
  if (!per_sample_threshold()) {
    Eigen::VectorXd rb = heaviside(rh, spec.beta, spec.tau);
    apply_solid_override(mesh, rb);
    return volume_fraction(rb);
  }
  double V = 0.0;
  for (int s = 0; s < n_samples(); ++s) {
    double sum = 0.0;
    const auto& tau = tau_s_[s];
    const auto& tbt = tbt_s_[s];
    const auto& den = denom_s_[s];
    for (int slot = 0; slot < n; ++slot) {
      if (mesh.solid[mesh.active_elems[slot]]) {
        sum += 1.0;
        continue;
      }
      sum += (tbt(slot) + std::tanh(spec.beta * (rh(slot) - tau(slot)))) / den(slot);
    }
    V += sample_weights(s) * sum / n;
  }
  return V;
}

double ResolutionModel::expected_volume_current() const {
  require_design();
  if (!per_sample_threshold()) return volume_fraction(rho_bar_shared_);
  double V = 0.0;
  for (int s = 0; s < n_samples(); ++s) V += sample_weights(s) * volume_fraction(rho_bar_s_[s]);
  return V;
}

Eigen::VectorXd ResolutionModel::volume_gradient_raw() const {
  require_design();
  if (!per_sample_threshold()) return volume_gradient(mesh, filter, dH_shared_);
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(mesh.n_active());
  for (int s = 0; s < n_samples(); ++s) dh += sample_weights(s) * dH_s_[s];
  return volume_gradient(mesh, filter, dh);
}

Eigen::VectorXd ResolutionModel::chain_to_raw_of(int i, const Eigen::VectorXd& grad_rho_bar) const {
  return chain_to_raw(mesh, filter, dH_of(i), grad_rho_bar);
}

SpMat ResolutionModel::assemble_at(int i) const {
  return assemble(mesh, rho_bar_of(i), spec.iota, true);
}

}  // namespace topopt
