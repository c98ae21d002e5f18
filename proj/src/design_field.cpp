#include "topopt/design_field.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "topopt/errors.hpp"

namespace topopt {

FilterOperator build_filter(const Mesh& mesh, double r_min) {
  if (r_min <= 0) throw ConfigError("build_filter: r_min must be > 0");
  const int n = mesh.n_active();
  const int reach = static_cast<int>(std::ceil(r_min));
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<std::pair<int, double>> row;
  for (int slot = 0; slot < n; ++slot) {
    int e = mesh.active_elems[slot];
    int exi = e % mesh.nx, eyi = e / mesh.nx;
    row.clear();
    double total = 0.0;
    for (int ey = std::max(0, eyi - reach); ey <= std::min(mesh.ny - 1, eyi + reach); ++ey)
      for (int ex = std::max(0, exi - reach); ex <= std::min(mesh.nx - 1, exi + reach); ++ex) {
        int j = mesh.active_index[ey * mesh.nx + ex];
        if (j < 0) continue;
        double d = std::hypot(static_cast<double>(ex - exi), static_cast<double>(ey - eyi));
        double w = r_min - d;
        if (w <= 0) continue;
        row.emplace_back(j, w);
        total += w;
      }
    for (auto& [j, w] : row) trips.emplace_back(slot, j, w / total);
  }
  FilterOperator op;
  op.r_min = r_min;
  op.weights.resize(n, n);
  op.weights.setFromTriplets(trips.begin(), trips.end());
  return op;
}

Eigen::VectorXd apply_filter(const FilterOperator& op, const Eigen::VectorXd& rho) {
  if (rho.size() != op.weights.rows()) throw ConfigError("apply_filter: size mismatch");
  return op.weights * rho;
}

Eigen::VectorXd apply_filter_transpose(const FilterOperator& op, const Eigen::VectorXd& g) {
  if (g.size() != op.weights.rows()) throw ConfigError("apply_filter_transpose: size mismatch");
  return op.weights.transpose() * g;
}

namespace {

inline double sech2(double x) {
  double t = std::tanh(x);
  return 1.0 - t * t;
}

inline void check_projection(const Eigen::VectorXd& rho_hat, double beta,
                             const Eigen::VectorXd& tau) {
  if (beta <= 0) throw ConfigError("heaviside: beta must be > 0");
  if (tau.size() != rho_hat.size()) throw ConfigError("heaviside: tau size mismatch");
  if ((tau.array() < 0).any() || (tau.array() > 1).any())
    throw ConfigError("heaviside: tau must lie in [0,1]");
}

}  // namespace

Eigen::VectorXd heaviside(const Eigen::VectorXd& rho_hat, double beta,
                          const Eigen::VectorXd& tau) {
  check_projection(rho_hat, beta, tau);
  Eigen::VectorXd out(rho_hat.size());
  for (Eigen::Index i = 0; i < rho_hat.size(); ++i) {
    double t = tau(i);
    double denom = std::tanh(beta * t) + std::tanh(beta * (1.0 - t));
    out(i) = (std::tanh(beta * t) + std::tanh(beta * (rho_hat(i) - t))) / denom;
  }
  return out;
}

Eigen::VectorXd heaviside(const Eigen::VectorXd& rho_hat, double beta, double tau) {
  return heaviside(rho_hat, beta, Eigen::VectorXd::Constant(rho_hat.size(), tau));
}

Eigen::VectorXd heaviside_derivative(const Eigen::VectorXd& rho_hat, double beta,
                                     const Eigen::VectorXd& tau) {
  check_projection(rho_hat, beta, tau);
  Eigen::VectorXd out(rho_hat.size());
  for (Eigen::Index i = 0; i < rho_hat.size(); ++i) {
    double t = tau(i);
    double denom = std::tanh(beta * t) + std::tanh(beta * (1.0 - t));
    out(i) = beta * sech2(beta * (rho_hat(i) - t)) / denom;
  }
  return out;
}

Eigen::VectorXd heaviside_derivative(const Eigen::VectorXd& rho_hat, double beta, double tau) {
  return heaviside_derivative(rho_hat, beta, Eigen::VectorXd::Constant(rho_hat.size(), tau));
}

void apply_solid_override(const Mesh& mesh, Eigen::VectorXd& rho_bar) {
  if (rho_bar.size() != mesh.n_active()) throw ConfigError("apply_solid_override: size mismatch");
  for (int slot = 0; slot < mesh.n_active(); ++slot)
    if (mesh.solid[mesh.active_elems[slot]]) rho_bar(slot) = 1.0;
}

void zero_at_solid(const Mesh& mesh, Eigen::VectorXd& v) {
  if (v.size() != mesh.n_active()) throw ConfigError("zero_at_solid: size mismatch");
  for (int slot = 0; slot < mesh.n_active(); ++slot)
    if (mesh.solid[mesh.active_elems[slot]]) v(slot) = 0.0;
}

double volume_fraction(const Eigen::VectorXd& rho_bar) {
  if (rho_bar.size() == 0) throw ConfigError("volume_fraction: empty field");
  return rho_bar.mean();
}

Eigen::VectorXd chain_to_raw(const Mesh& mesh, const FilterOperator& op,
                             const Eigen::VectorXd& dH, const Eigen::VectorXd& grad_rho_bar) {
  if (dH.size() != grad_rho_bar.size() || dH.size() != mesh.n_active())
    throw ConfigError("chain_to_raw: size mismatch");
  Eigen::VectorXd inner = dH.cwiseProduct(grad_rho_bar);
  zero_at_solid(mesh, inner);
  return apply_filter_transpose(op, inner);
}

Eigen::VectorXd volume_gradient(const Mesh& mesh, const FilterOperator& op,
                                const Eigen::VectorXd& dH) {
  Eigen::VectorXd ones =
      Eigen::VectorXd::Constant(mesh.n_active(), 1.0 / static_cast<double>(mesh.n_active()));
  return chain_to_raw(mesh, op, dH, ones);
}

Eigen::VectorXd restrict_density(const Eigen::VectorXd& rho_fine, const Mesh& fine,
                                 const Mesh& coarse) {
  if (rho_fine.size() != fine.n_active()) throw ConfigError("restrict_density: size mismatch");
  if (fine.nx % coarse.nx != 0 || fine.ny % coarse.ny != 0)
    throw ConfigError("restrict_density: fine resolution must be an integer multiple of coarse");
  int rx = fine.nx / coarse.nx, ry = fine.ny / coarse.ny;
  if (rx != ry) throw ConfigError("restrict_density: anisotropic coarsening ratio");
  Eigen::VectorXd out(coarse.n_active());
  for (int slot = 0; slot < coarse.n_active(); ++slot) {
    int e = coarse.active_elems[slot];
    int cx = e % coarse.nx, cy = e / coarse.nx;
    double sum = 0.0;
    int count = 0;
    for (int fy = cy * ry; fy < (cy + 1) * ry; ++fy)
      for (int fx = cx * rx; fx < (cx + 1) * rx; ++fx) {
        int fslot = fine.active_index[fy * fine.nx + fx];
        if (fslot < 0) continue;
        sum += rho_fine(fslot);
        ++count;
      }
    if (count == 0)
      throw NumericalError("restrict_density: coarse active cell covers no fine active cells");
    out(slot) = sum / count;
  }
  return out;
}

}  // namespace topopt
