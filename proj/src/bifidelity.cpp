#include "topopt/bifidelity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "topopt/errors.hpp"

namespace topopt {

double inner_product(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ConfigError("inner_product: size mismatch");
  if (a.size() == 0) throw ConfigError("inner_product: empty vectors");
  return a.dot(b) / static_cast<double>(a.size());
}

double h_norm(const Eigen::VectorXd& a) { return std::sqrt(inner_product(a, a)); }

ImportantSet select_important(const Eigen::MatrixXd& U, int n) {
  const int N = static_cast<int>(U.cols());
  if (n < 1 || n > N) throw ConfigError("select_important: n out of range");
  if (!U.allFinite()) throw NumericalError("select_important: NaN/inf in snapshots");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(U);
  ImportantSet out;
  out.n = n;
  out.pivots.resize(N);
  for (int k = 0; k < N; ++k) out.pivots[k] = qr.colsPermutation().indices()(k);

  const int m = static_cast<int>(std::min(U.rows(), U.cols()));
  out.r_diag.resize(m);
  for (int k = 0; k < m; ++k) out.r_diag(k) = std::abs(qr.matrixR()(k, k));
  out.rank = 0;
  for (int k = 0; k < m; ++k)
    if (out.r_diag(k) > 1e-12 * out.r_diag(0)) ++out.rank;
  out.budget_exceeds_rank = n > out.rank;
  return out;
}

Eigen::MatrixXd gramian_matrix(const Eigen::MatrixXd& cols) {
  const double dim = static_cast<double>(cols.rows());
  return (cols.transpose() * cols) / dim;
}

GramianFactor build_gramian(const Eigen::MatrixXd& cols) {
  Eigen::MatrixXd G = gramian_matrix(cols);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
  if (eig.info() != Eigen::Success) throw NumericalError("build_gramian: eigensolver failed");
  GramianFactor f;
  f.evals = eig.eigenvalues();
  f.evecs = eig.eigenvectors();
  f.sigma_max = f.evals.maxCoeff();
  f.truncated = f.evals.minCoeff() <= 1e-12 * f.sigma_max;
  return f;
}

Eigen::VectorXd GramianFactor::solve(const Eigen::VectorXd& f) const {
  if (f.size() != evals.size()) throw ConfigError("GramianFactor::solve: size mismatch");
  const double cutoff = 1e-12 * sigma_max;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(f.size());
  for (Eigen::Index k = 0; k < evals.size(); ++k) {
    if (evals(k) <= cutoff) continue;
    c += (evecs.col(k).dot(f) / evals(k)) * evecs.col(k);
  }
  return c;
}

Eigen::VectorXd interpolation_coeffs(const GramianFactor& G, const Eigen::MatrixXd& basis,
                                     const Eigen::VectorXd& target) {
  if (basis.cols() != G.evals.size())
    throw ConfigError("interpolation_coeffs: basis/Gramian mismatch");
  Eigen::VectorXd f = (basis.transpose() * target) / static_cast<double>(basis.rows());
  return G.solve(f);
}

Eigen::VectorXd lift(const Eigen::MatrixXd& basis, const Eigen::VectorXd& c) {
  if (c.size() != basis.cols()) throw ConfigError("lift: coefficient count mismatch");
  return basis * c;
}

Certificate certify(const Eigen::MatrixXd& U_L, const ImportantSet& imp,
                    const Eigen::MatrixXd& U_H_imp, int probe_budget,
                    const CertifyHooks& hooks) {
  const int N = static_cast<int>(U_L.cols());
  const int n = imp.n;
  if (probe_budget < 1) throw ConfigError("certify: probe budget must be >= 1");
  if (probe_budget > N - n) throw ConfigError("certify: probe budget exceeds unimportant samples");
  if (U_H_imp.cols() != n) throw ConfigError("certify: fine snapshot count != n");

  Eigen::MatrixXd U_L_imp(U_L.rows(), n);
  for (int k = 0; k < n; ++k) U_L_imp.col(k) = U_L.col(imp.pivots[k]);
  GramianFactor G_L = build_gramian(U_L_imp);
  GramianFactor G_H = build_gramian(U_H_imp);

  Certificate cert;
  cert.sigma_max_GH = G_H.sigma_max;
  double max_cl = 0.0;
  for (int k = 0; k < probe_budget; ++k) {
    const int s = imp.pivots[n + k];
    cert.probe_samples.push_back(s);

    Eigen::VectorXd c_L = interpolation_coeffs(G_L, U_L_imp, U_L.col(s));
    Eigen::VectorXd u_H = hooks.solve_fine(s);
    Eigen::VectorXd c_H = interpolation_coeffs(G_H, U_H_imp, u_H);

    Eigen::VectorXd u_hat = lift(U_H_imp, c_L);   // bi-fidelity estimate
    Eigen::VectorXd u_proj = lift(U_H_imp, c_H);  // best-in-span reference

    cert.epsilon = std::max(cert.epsilon, (c_H - c_L).norm());
    double denom = h_norm(u_proj - u_hat);
    if (denom > 1e-300)
      cert.delta = std::max(cert.delta, h_norm(u_H - u_proj) / denom);
    max_cl = std::max(max_cl, c_L.norm());

    cert.actual_u = std::max(cert.actual_u, h_norm(u_H - u_hat));
    if (hooks.compliance)
      cert.actual_C = std::max(cert.actual_C,
                               std::abs(hooks.compliance(s, u_H) - hooks.compliance(s, u_hat)));
    if (hooks.sensitivity_elem)
      cert.actual_dC =
          std::max(cert.actual_dC, std::abs(hooks.sensitivity_elem(s, u_H) -
                                            hooks.sensitivity_elem(s, u_hat)));
  }

  const double ed = cert.epsilon * (1.0 + cert.delta);
  cert.bound_u = ed * std::sqrt(cert.sigma_max_GH);
  const double A = ed * cert.sigma_max_GH * (2.0 * max_cl + ed);
  cert.bound_C = A * hooks.sigma_max_K;
  cert.bound_dC = A * hooks.sigma_max_dK;
  return cert;
}

}  // namespace topopt
