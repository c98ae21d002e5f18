#include "topopt/random_field.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "topopt/errors.hpp"

namespace topopt {

Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& coords, double lc) {
  if (lc <= 0) throw ConfigError("covariance_matrix: lc must be > 0");
  const Eigen::Index n = coords.rows();
  Eigen::MatrixXd R(n, n);
  const double inv = 1.0 / (2.0 * lc * lc);
  for (Eigen::Index i = 0; i < n; ++i) {
    R(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      double d2 = (coords.row(i) - coords.row(j)).squaredNorm();
      R(i, j) = R(j, i) = std::exp(-d2 * inv);
    }
  }
  return R;
}

void kl_decompose(const Eigen::MatrixXd& R, int n_M, Eigen::VectorXd& lambdas,
                  Eigen::MatrixXd& modes, double& energy_ratio) {
  const Eigen::Index n = R.rows();
  if (n_M < 1 || n_M > n) throw ConfigError("kl_decompose: n_M out of range");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
  if (eig.info() != Eigen::Success) throw NumericalError("kl_decompose: eigensolver failed");

  // Eigen returns ascending order; take from the back.
  lambdas.resize(n_M);
  modes.resize(n, n_M);
  for (int i = 0; i < n_M; ++i) {
    lambdas(i) = std::max(eig.eigenvalues()(n - 1 - i), 0.0);
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - i);
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
    modes.col(i) = v;
  }

  const Eigen::Index n_ref = std::min<Eigen::Index>(100, n);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n_M; ++i) num += std::sqrt(lambdas(i));
  for (Eigen::Index i = 0; i < n_ref; ++i)
    den += std::sqrt(std::max(eig.eigenvalues()(n - 1 - i), 0.0));
  energy_ratio = num / den;
}

KLModel build_load_model(int fine_nx, double lc, int n_M, double gamma0) {
  if (fine_nx < 1) throw ConfigError("build_load_model: nx must be >= 1");
  KLModel m;
  m.lc = lc;
  m.n_M = n_M;
  m.gamma0 = gamma0;
  m.support = SupportKind::top_edge_load_nodes;
  m.grid_nx = fine_nx;
  m.grid_ny = 0;
  m.coords.resize(fine_nx + 1, 2);
  for (int i = 0; i <= fine_nx; ++i) {
    m.coords(i, 0) = static_cast<double>(i) / fine_nx;
    m.coords(i, 1) = 1.0;
  }
  Eigen::MatrixXd R = covariance_matrix(m.coords, lc);
  kl_decompose(R, n_M, m.lambdas, m.modes, m.energy_ratio);
  return m;
}

KLModel build_threshold_model(int fine_nx, int fine_ny, double lc, int n_M, double gamma0) {
  if (fine_nx < 1 || fine_ny < 1) throw ConfigError("build_threshold_model: bad grid");
  KLModel m;
  m.lc = lc;
  m.n_M = n_M;
  m.gamma0 = gamma0;
  m.support = SupportKind::element_centroids;
  m.grid_nx = fine_nx;
  m.grid_ny = fine_ny;
  m.coords.resize(static_cast<Eigen::Index>(fine_nx) * fine_ny, 2);
  for (int ey = 0; ey < fine_ny; ++ey)
    for (int ex = 0; ex < fine_nx; ++ex) {
      Eigen::Index r = static_cast<Eigen::Index>(ey) * fine_nx + ex;
      m.coords(r, 0) = (ex + 0.5) / fine_nx;
      m.coords(r, 1) = (ey + 0.5) / fine_ny;
    }
  Eigen::MatrixXd R = covariance_matrix(m.coords, lc);
  kl_decompose(R, n_M, m.lambdas, m.modes, m.energy_ratio);
  return m;
}

namespace {

// Linear interpolation of columns sampled at x_i = i/nx (nodes) to target x.
double interp_edge(const Eigen::VectorXd& col, int nx, double x) {
  double t = std::clamp(x * nx, 0.0, static_cast<double>(nx));
  int i0 = static_cast<int>(std::floor(t));
  int i1 = std::min(i0 + 1, nx);
  double f = t - i0;
  return (1.0 - f) * col(i0) + f * col(i1);
}

// Bilinear interpolation of columns sampled at centroids ((ex+0.5)/nx, (ey+0.5)/ny).
double interp_centroid(const Eigen::VectorXd& col, int nx, int ny, double x, double y) {
  double gx = std::clamp(x * nx - 0.5, 0.0, static_cast<double>(nx - 1));
  double gy = std::clamp(y * ny - 0.5, 0.0, static_cast<double>(ny - 1));
  int x0 = static_cast<int>(std::floor(gx)), y0 = static_cast<int>(std::floor(gy));
  int x1 = std::min(x0 + 1, nx - 1), y1 = std::min(y0 + 1, ny - 1);
  double fx = gx - x0, fy = gy - y0;
  auto at = [&](int ix, int iy) { return col(static_cast<Eigen::Index>(iy) * nx + ix); };
  return (1 - fx) * (1 - fy) * at(x0, y0) + fx * (1 - fy) * at(x1, y0) +
         (1 - fx) * fy * at(x0, y1) + fx * fy * at(x1, y1);
}

}  // namespace

KLModel interpolate_model(const KLModel& model, int target_nx, int target_ny) {
  KLModel out = model;
  if (model.support == SupportKind::top_edge_load_nodes) {
    out.grid_nx = target_nx;
    out.coords.resize(target_nx + 1, 2);
    out.modes.resize(target_nx + 1, model.n_M);
    for (int i = 0; i <= target_nx; ++i) {
      double x = static_cast<double>(i) / target_nx;
      out.coords(i, 0) = x;
      out.coords(i, 1) = 1.0;
      for (int k = 0; k < model.n_M; ++k)
        out.modes(i, k) = interp_edge(model.modes.col(k), model.grid_nx, x);
    }
  } else {
    out.grid_nx = target_nx;
    out.grid_ny = target_ny;
    Eigen::Index n = static_cast<Eigen::Index>(target_nx) * target_ny;
    out.coords.resize(n, 2);
    out.modes.resize(n, model.n_M);
    for (int ey = 0; ey < target_ny; ++ey)
      for (int ex = 0; ex < target_nx; ++ex) {
        Eigen::Index r = static_cast<Eigen::Index>(ey) * target_nx + ex;
        double x = (ex + 0.5) / target_nx, y = (ey + 0.5) / target_ny;
        out.coords(r, 0) = x;
        out.coords(r, 1) = y;
        for (int k = 0; k < model.n_M; ++k)
          out.modes(r, k) =
              interp_centroid(model.modes.col(k), model.grid_nx, model.grid_ny, x, y);
      }
  }
  return out;
}

Eigen::VectorXd evaluate_field(const KLModel& model, const Eigen::VectorXd& p) {
  if (p.size() != model.n_M) throw ConfigError("evaluate_field: parameter dimension mismatch");
  Eigen::VectorXd z =
      Eigen::VectorXd::Constant(model.modes.rows(), model.gamma0);
  for (int k = 0; k < model.n_M; ++k) z += std::sqrt(model.lambdas(k)) * p(k) * model.modes.col(k);
  return z;
}

Eigen::VectorXd threshold_field(const KLModel& model, const Eigen::VectorXd& p, double a1,
                                double a2) {
  Eigen::VectorXd z = evaluate_field(model, p);
  Eigen::VectorXd tau(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double var = 0.0;  // pointwise Var Z = sum_k lambda_k mode_k(x)^2 * Var U(-1,1)
    for (int k = 0; k < model.n_M; ++k)
      var += model.lambdas(k) * model.modes(i, k) * model.modes(i, k) / 3.0;
    double zs = var > 0 ? z(i) / std::sqrt(var) : 0.0;
    double phi = 0.5 * std::erfc(-zs / std::numbers::sqrt2);
    tau(i) = a1 * (2.0 * phi - 1.0) + a2;
    if (tau(i) < 0.0 || tau(i) > 1.0)
      throw ConfigError("threshold_field: tau outside [0,1]; adjust a1/a2");
  }
  return tau;
}

Eigen::VectorXd load_vector(const Mesh& mesh, const KLModel& model, const Eigen::VectorXd& p,
                            double f2) {
  if (model.support != SupportKind::top_edge_load_nodes)
    throw ConfigError("load_vector: model not supported on top-edge nodes");
  if (model.grid_nx != mesh.nx)
    throw ConfigError("load_vector: model resolution does not match mesh");
  Eigen::VectorXd z = evaluate_field(model, p);
  Eigen::VectorXd F = Eigen::VectorXd::Zero(mesh.dof_count());
  for (int i = 0; i <= mesh.nx; ++i) {
    double w = mesh.element_size * ((i == 0 || i == mesh.nx) ? 0.5 : 1.0);
    int node = mesh.node_id(i, mesh.ny);
    F(2 * node) += z(i) * w;
    F(2 * node + 1) -= f2 * w;
  }
  return F;
}

}  // namespace topopt
