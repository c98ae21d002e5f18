#include "topopt/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <vector>

#include "topopt/errors.hpp"

namespace topopt {

Moments compute_moments(const Eigen::VectorXd& C, const Eigen::VectorXd& w) {
  if (C.size() != w.size() || C.size() == 0) throw ConfigError("compute_moments: size mismatch");
  Moments m;
  m.mu = w.dot(C);
  double m2 = w.dot(C.cwiseProduct(C));
  double rad = m2 - m.mu * m.mu;
  double scale = std::max({std::abs(m2), m.mu * m.mu, 1.0});
  if (rad < -1e-12 * scale)
    std::fprintf(stderr, "warning: variance radicand %.3e clamped to zero\n", rad);
  m.sigma = std::sqrt(std::max(rad, 0.0));
  return m;
}

Eigen::VectorXd sigma_gradient(double mu, double sigma, const Eigen::VectorXd& grad_mu,
                               const Eigen::VectorXd& grad_cc) {
  if (!(sigma > 1e-12 * std::abs(mu)))
    return Eigen::VectorXd::Zero(grad_mu.size());
  return (grad_cc - mu * grad_mu) / sigma;
}

namespace {

double clock_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
  return 0.5 * (hi + v[mid - 1]);
}

}  // namespace

OcResult oc_update(const Eigen::VectorXd& rho, const Eigen::VectorXd& grad_Q,
                   const Eigen::VectorXd& grad_V, const OcParams& prm,
                   const std::function<double(const Eigen::VectorXd&)>& volume_of,
                   const std::vector<int>& design_slots) {
  if (rho.size() != grad_Q.size() || rho.size() != grad_V.size())
    throw ConfigError("oc_update: size mismatch");
  if (design_slots.empty()) throw ConfigError("oc_update: no design variables");
  for (int e : design_slots)
    if (!(grad_V(e) > 0)) throw ConfigError("oc_update: volume gradient must be positive");

  Eigen::VectorXd gq = grad_Q;
  for (int e : design_slots) gq(e) = std::min(gq(e), -1e-10);

  auto candidate = [&](double lam) {
    Eigen::VectorXd r = rho;
    for (int e : design_slots) {
      double v = rho(e) * std::pow(-gq(e) / (lam * grad_V(e)), prm.eta);
      v = std::min({v, rho(e) + prm.move, 1.0});
      v = std::max({v, rho(e) - prm.move, prm.rho_min});
      r(e) = v;
    }
    return r;
  };
  auto finish = [&](Eigen::VectorXd r, double V, double lam) {
    double change = 0.0;
    for (int e : design_slots) change = std::max(change, std::abs(r(e) - rho(e)));
    return OcResult{std::move(r), V, change, lam};
  };

  double lo = 1e-9, hi = 1e9;
  Eigen::VectorXd cand = candidate(lo);
  double V = volume_of(cand);
  if (V <= prm.vbar + prm.vol_tol) return finish(std::move(cand), V, lo);
  cand = candidate(hi);
  V = volume_of(cand);
  if (V > prm.vbar + prm.vol_tol)
    throw NumericalError("oc_update: volume " + std::to_string(V) +
                         " cannot be reduced to vbar even at the multiplier cap");
  // run the bisection to interval collapse rather than stopping at the first
  // multiplier inside the volume tolerance: a sharp multiplier makes the update a
  // fixed point (to ~1e-12) in the uniform symmetric case
  Eigen::VectorXd best_cand;
  double best_V = 0.0, best_lam = 0.0, best_gap = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-13; ++it) {
    double mid = std::sqrt(lo * hi);
    cand = candidate(mid);
    V = volume_of(cand);
    if (std::abs(V - prm.vbar) < best_gap) {
      best_gap = std::abs(V - prm.vbar);
      best_cand = cand;
      best_V = V;
      best_lam = mid;
    }
    (V > prm.vbar ? lo : hi) = mid;
  }
  if (best_gap <= prm.vol_tol) return finish(std::move(best_cand), best_V, best_lam);
  throw NumericalError("oc_update: bisection failed to meet the volume tolerance (closest " +
                       std::to_string(best_V) + " vs target " + std::to_string(prm.vbar) + ")");
}

OcResult gd_update(const Eigen::VectorXd& rho, const Eigen::VectorXd& grad_Q,
                   const Eigen::VectorXd& grad_V, const OcParams& prm,
                   const std::function<double(const Eigen::VectorXd&)>& volume_of,
                   const std::vector<int>& design_slots) {
  if (design_slots.empty()) throw ConfigError("gd_update: no design variables");
  double gmax = 0.0;
  for (int e : design_slots) gmax = std::max(gmax, std::abs(grad_Q(e)));
  double step = prm.move / std::max(gmax, 1e-30);

  auto candidate = [&](double lam) {
    Eigen::VectorXd r = rho;
    for (int e : design_slots) {
      double v = rho(e) - step * (grad_Q(e) + lam * grad_V(e));
      v = std::min({v, rho(e) + prm.move, 1.0});
      v = std::max({v, rho(e) - prm.move, prm.rho_min});
      r(e) = v;
    }
    return r;
  };
  auto finish = [&](Eigen::VectorXd r, double V, double lam) {
    double change = 0.0;
    for (int e : design_slots) change = std::max(change, std::abs(r(e) - rho(e)));
    return OcResult{std::move(r), V, change, lam};
  };

  double lo = -1.0, hi = 1.0;
  while (volume_of(candidate(lo)) < prm.vbar - prm.vol_tol && lo > -1e12) lo *= 10.0;
  while (volume_of(candidate(hi)) > prm.vbar + prm.vol_tol && hi < 1e12) hi *= 10.0;
  Eigen::VectorXd cand = candidate(lo);
  double V = volume_of(cand);
  if (V < prm.vbar - prm.vol_tol) return finish(std::move(cand), V, lo);  // move-limited
  cand = candidate(hi);
  V = volume_of(cand);
  if (V > prm.vbar + prm.vol_tol)
    throw NumericalError("gd_update: cannot reach the volume target");
  for (int it = 0; it < 300; ++it) {
    double mid = 0.5 * (lo + hi);
    cand = candidate(mid);
    V = volume_of(cand);
    if (std::abs(V - prm.vbar) <= prm.vol_tol) return finish(std::move(cand), V, mid);
    (V > prm.vbar ? lo : hi) = mid;
  }
  throw NumericalError("gd_update: bisection failed to meet the volume tolerance");
}

Eigen::VectorXd initial_design(const Mesh& mesh, double vbar) {
  Eigen::VectorXd rho = Eigen::VectorXd::Constant(mesh.n_active(), vbar);
  for (int slot = 0; slot < mesh.n_active(); ++slot)
    if (mesh.solid[mesh.active_elems[slot]]) rho(slot) = 1.0;
  return rho;
}

namespace {

struct Objective {
  double Q = 0.0, mu = 0.0, sigma = 0.0;
  Eigen::VectorXd grad_Q;
  Eigen::VectorXd per_C;
};

Objective evaluate_objective(ResolutionModel& m, double lambda,
                             const std::function<Eigen::VectorXd(int)>& u_of) {
  const int N = m.n_samples();
  const int na = m.mesh.n_active();
  Eigen::VectorXd C(N);
  Eigen::VectorXd acc_mu = Eigen::VectorXd::Zero(na);
  Eigen::VectorXd acc_cc = Eigen::VectorXd::Zero(na);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd u = u_of(i);
    C(i) = m.compliance_of(i, u);
    Eigen::VectorXd h = m.dH_of(i).cwiseProduct(m.grad_rho_bar_of(i, u));
    double w = m.sample_weights(i);
    acc_mu += w * h;
    acc_cc += (w * C(i)) * h;
  }
  Moments mo = compute_moments(C, m.sample_weights);
  Eigen::VectorXd grad_mu = apply_filter_transpose(m.filter, acc_mu);
  Eigen::VectorXd grad_cc = apply_filter_transpose(m.filter, acc_cc);
  Eigen::VectorXd grad_sig = sigma_gradient(mo.mu, mo.sigma, grad_mu, grad_cc);

  Objective o;
  o.mu = mo.mu;
  o.sigma = mo.sigma;
  o.Q = mo.mu + lambda * mo.sigma;
  o.grad_Q = grad_mu + lambda * grad_sig;
  o.per_C = std::move(C);
  return o;
}

double continuation_beta(double beta0, int iter, bool enabled) {
  if (!enabled) return beta0;
  double b = beta0 * std::pow(2.0, (iter - 1) / 50);
  return std::clamp(b, beta0, 64.0);
}

}  // namespace

RunResult run_single_resolution(ResolutionModel& model, const RunParams& prm) {
  double t0 = clock_s();
  RunResult res;
  Eigen::VectorXd rho = initial_design(model.mesh, prm.vbar);
  OcParams ocp{prm.vbar, prm.move, prm.eta, kRhoMin, 1e-4};
  const double beta0 = model.spec.beta;

  for (int iter = 1; iter <= prm.max_iters; ++iter) {
    double b = continuation_beta(beta0, iter, prm.beta_continuation);
    if (b != model.spec.beta) model.set_beta(b);

    double tf = clock_s();
    model.set_design(rho);
    Objective obj =
        evaluate_objective(model, prm.lambda, [&](int i) { return model.solve_sample(i); });
    res.timings.fine_solves_s += clock_s() - tf;

    Eigen::VectorXd grad_V = model.volume_gradient_raw();
    auto volume_of = [&](const Eigen::VectorXd& c) { return model.expected_volume_of_raw(c); };
    OcResult upd = prm.gd_fallback
                       ? gd_update(rho, obj.grad_Q, grad_V, ocp, volume_of, model.mesh.design_slots)
                       : oc_update(rho, obj.grad_Q, grad_V, ocp, volume_of, model.mesh.design_slots);

    res.history.push_back(
        {iter, obj.Q, obj.mu, obj.sigma, upd.volume, upd.change, model.n_samples()});
    rho = upd.rho;
    if (upd.change < prm.tol_change) {
      res.converged = true;
      break;
    }
  }
  res.rho = std::move(rho);
  res.timings.total_s = clock_s() - t0;
  return res;
}

RunResult run_bifidelity(ResolutionModel& fine, ResolutionModel& coarse, const RunParams& prm) {
  double t0 = clock_s();
  RunResult res;
  Eigen::VectorXd rho = initial_design(fine.mesh, prm.vbar);
  OcParams ocp{prm.vbar, prm.move, prm.eta, kRhoMin, 1e-4};
  const double beta0 = fine.spec.beta;
  const int N = fine.n_samples();
  if (coarse.n_samples() != N)
    throw ConfigError("run_bifidelity: coarse and fine sample sets differ");

  ImportantSet imp;
  bool have_selection = false;

  for (int iter = 1; iter <= prm.max_iters; ++iter) {
    double b = continuation_beta(beta0, iter, prm.beta_continuation);
    if (b != fine.spec.beta) {
      fine.set_beta(b);
      coarse.set_beta(b);
    }

    double tc = clock_s();
    Eigen::VectorXd rho_c = restrict_density(rho, fine.mesh, coarse.mesh);
    coarse.set_design(rho_c);
    Eigen::MatrixXd U_L = coarse.solve_all();
    res.timings.coarse_solves_s += clock_s() - tc;

    double tq = clock_s();
    bool refresh = !have_selection || prm.reuse_important <= 1 ||
                   (iter - 1) % prm.reuse_important == 0;
    if (refresh) {
      imp = select_important(U_L, 1);
      int n_use = prm.n_important > 0 ? std::min(prm.n_important, N) : imp.rank;
      imp.n = n_use;
      imp.budget_exceeds_rank = n_use > imp.rank;
      have_selection = true;
    }
    res.timings.qr_s += clock_s() - tq;
    const int n = imp.n;

    double tf = clock_s();
    fine.set_design(rho);
    Eigen::MatrixXd U_H_imp(fine.mesh.dof_count(), n);
    for (int k = 0; k < n; ++k) U_H_imp.col(k) = fine.solve_sample(imp.pivots[k]);
    res.timings.fine_solves_s += clock_s() - tf;
    int n_hi = n;

    double tl = clock_s();
    Eigen::MatrixXd U_L_imp(coarse.mesh.dof_count(), n);
    for (int k = 0; k < n; ++k) U_L_imp.col(k) = U_L.col(imp.pivots[k]);
    GramianFactor G_L = build_gramian(U_L_imp);
    std::map<int, int> imp_pos;
    for (int k = 0; k < n; ++k) imp_pos[imp.pivots[k]] = k;
    auto u_of = [&](int i) -> Eigen::VectorXd {
      auto it = imp_pos.find(i);
      if (it != imp_pos.end()) return U_H_imp.col(it->second);
      Eigen::VectorXd c = interpolation_coeffs(G_L, U_L_imp, U_L.col(i));
      return lift(U_H_imp, c);
    };
    Objective obj = evaluate_objective(fine, prm.lambda, u_of);
    res.timings.lift_s += clock_s() - tl;

    if (prm.certify) {
      double tcert = clock_s();
      std::map<int, Eigen::VectorXd> probe_cache;
      CertifyHooks hooks;
      hooks.solve_fine = [&](int s) {
        auto it = probe_cache.find(s);
        if (it == probe_cache.end()) {
          it = probe_cache.emplace(s, fine.solve_sample(s)).first;
          ++n_hi;
        }
        return it->second;
      };
      const int probe0 = imp.pivots.at(std::min(n, N - 1));
      Eigen::VectorXd u_p0 = hooks.solve_fine(probe0);
      int slot = prm.certify_slot;
      if (slot < 0) {
        Eigen::VectorXd g = fine.grad_rho_bar_of(probe0, u_p0);
        double best = -1.0;
        for (int e : fine.mesh.design_slots)
          if (std::abs(g(e)) > best) {
            best = std::abs(g(e));
            slot = e;
          }
      }
      hooks.sigma_max_K = sigma_max(fine.assemble_at(probe0));
      hooks.sigma_max_dK =
          sigma_max_stiffness_derivative(fine.mesh, fine.rho_bar_of(probe0), fine.spec.iota, slot);
      const double dof = static_cast<double>(fine.mesh.dof_count());
      hooks.compliance = [&](int s, const Eigen::VectorXd& u) {
        return fine.compliance_of(s, u) / dof;
      };
      hooks.sensitivity_elem = [&, slot](int s, const Eigen::VectorXd& u) {
        return fine.grad_rho_bar_of(s, u)(slot) / dof;
      };
      // rank can approach the sample count mid-run; probe whatever unimportant
      // samples remain rather than aborting the whole optimization
      const int probes_avail = std::min(prm.probes, N - imp.n);
      if (probes_avail < 1)
        throw ConfigError(
            "certify: every sample is in the important set (rank == sample count); "
            "increase the sample count or set n_important below it");
      res.certificates.push_back(certify(U_L, imp, U_H_imp, probes_avail, hooks));
      res.timings.fine_solves_s += clock_s() - tcert;
    }

    Eigen::VectorXd grad_V = fine.volume_gradient_raw();
    auto volume_of = [&](const Eigen::VectorXd& c) { return fine.expected_volume_of_raw(c); };
    OcResult upd = prm.gd_fallback
                       ? gd_update(rho, obj.grad_Q, grad_V, ocp, volume_of, fine.mesh.design_slots)
                       : oc_update(rho, obj.grad_Q, grad_V, ocp, volume_of, fine.mesh.design_slots);

    res.history.push_back({iter, obj.Q, obj.mu, obj.sigma, upd.volume, upd.change, n_hi});
    rho = upd.rho;
    if (upd.change < prm.tol_change) {
      res.converged = true;
      break;
    }
  }
  res.rho = std::move(rho);
  res.last_rank = imp.rank;
  res.last_n_important = imp.n;
  res.timings.total_s = clock_s() - t0;
  return res;
}

std::vector<SweepRow> sweep_important_count(ResolutionModel& fine, ResolutionModel& coarse,
                                            const Eigen::VectorXd& rho_raw, int n_max) {
  const int N = fine.n_samples();
  if (coarse.n_samples() != N)
    throw ConfigError("sweep_important_count: coarse and fine sample sets differ");
  if (n_max < 1) throw ConfigError("sweep_important_count: n_max must be >= 1");

  coarse.set_design(restrict_density(rho_raw, fine.mesh, coarse.mesh));
  Eigen::MatrixXd U_L = coarse.solve_all();
  fine.set_design(rho_raw);
  Eigen::MatrixXd U_H = fine.solve_all();

  const int n_lim = std::min(n_max, N);
  ImportantSet imp = select_important(U_L, n_lim);

  std::vector<SweepRow> rows;
  for (int n = 1; n <= n_lim; ++n) {
    Eigen::MatrixXd basis_L(U_L.rows(), n), basis_H(U_H.rows(), n);
    for (int k = 0; k < n; ++k) {
      basis_L.col(k) = U_L.col(imp.pivots[k]);
      basis_H.col(k) = U_H.col(imp.pivots[k]);
    }
    GramianFactor G = build_gramian(basis_L);
    std::vector<double> eu, ec, eg;
    eu.reserve(N);
    ec.reserve(N);
    eg.reserve(N);
    for (int i = 0; i < N; ++i) {
      Eigen::VectorXd c = interpolation_coeffs(G, basis_L, U_L.col(i));
      Eigen::VectorXd u_hat = lift(basis_H, c);
      Eigen::VectorXd u = U_H.col(i);
      eu.push_back(h_norm(u_hat - u) / h_norm(u));
      double Cu = fine.compliance_of(i, u);
      ec.push_back(std::abs(fine.compliance_of(i, u_hat) - Cu) / std::abs(Cu));
      Eigen::VectorXd gu = fine.grad_rho_bar_of(i, u);
      eg.push_back((fine.grad_rho_bar_of(i, u_hat) - gu).norm() / gu.norm());
    }
    rows.push_back({n, median_of(eu), median_of(ec), median_of(eg)});
  }
  return rows;
}

namespace {

double mean_active_von_mises(const ResolutionModel& m, int i, const Eigen::VectorXd& u) {
  Eigen::VectorXd s = von_mises(m.mesh, u, m.rho_bar_of(i), m.spec.iota);
  double sum = 0.0;
  for (int e : m.mesh.active_elems) sum += s(e);
  return sum / m.mesh.n_active();
}

}  // namespace

std::vector<StressRow> stress_study(ResolutionModel& fine, ResolutionModel& coarse,
                                    const Eigen::VectorXd& rho_raw,
                                    const SampleSet& quad_samples, int n_important,
                                    int mc_samples, std::uint64_t mc_seed, int ref_level) {
  const int d = fine.n_modes();
  if (d < 1) throw ConfigError("stress_study: needs an uncertain problem");

  // dense reference moments
  SampleSet ref = sparse_grid(d, ref_level);
  fine.set_samples(ref.points, ref.weights);
  fine.set_design(rho_raw);
  Eigen::VectorXd s_ref(ref.count());
  for (int i = 0; i < ref.count(); ++i)
    s_ref(i) = mean_active_von_mises(fine, i, fine.solve_sample(i));
  Moments m_ref = compute_moments(s_ref, ref.weights);

  // bi-fidelity estimate on the working quadrature
  coarse.set_samples(quad_samples.points, quad_samples.weights);
  coarse.set_design(restrict_density(rho_raw, fine.mesh, coarse.mesh));
  Eigen::MatrixXd U_L = coarse.solve_all();
  const int N = quad_samples.count();
  const int n = std::min(n_important, N);
  ImportantSet imp = select_important(U_L, n);
  fine.set_samples(quad_samples.points, quad_samples.weights);
  fine.set_design(rho_raw);
  Eigen::MatrixXd U_L_imp(U_L.rows(), n), U_H_imp(fine.mesh.dof_count(), n);
  for (int k = 0; k < n; ++k) {
    U_L_imp.col(k) = U_L.col(imp.pivots[k]);
    U_H_imp.col(k) = fine.solve_sample(imp.pivots[k]);
  }
  GramianFactor G_L = build_gramian(U_L_imp);
  Eigen::VectorXd s_bifi(N);
  for (int i = 0; i < N; ++i) {
    int pos = -1;
    for (int k = 0; k < n; ++k)
      if (imp.pivots[k] == i) pos = k;
    Eigen::VectorXd u = pos >= 0
                            ? Eigen::VectorXd(U_H_imp.col(pos))
                            : lift(U_H_imp, interpolation_coeffs(G_L, U_L_imp, U_L.col(i)));
    s_bifi(i) = mean_active_von_mises(fine, i, u);
  }
  Moments m_bifi = compute_moments(s_bifi, quad_samples.weights);

  // plain Monte Carlo with true fine solves
  SampleSet mc = monte_carlo(d, mc_samples, mc_seed);
  fine.set_samples(mc.points, mc.weights);
  fine.set_design(rho_raw);
  Eigen::VectorXd s_mc(mc.count());
  for (int i = 0; i < mc.count(); ++i)
    s_mc(i) = mean_active_von_mises(fine, i, fine.solve_sample(i));
  Moments m_mc = compute_moments(s_mc, mc.weights);

  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  std::vector<StressRow> rows;
  rows.push_back({"bifi", n, rel(m_bifi.mu, m_ref.mu), rel(m_bifi.sigma, m_ref.sigma)});
  rows.push_back({"mc", mc_samples, rel(m_mc.mu, m_ref.mu), rel(m_mc.sigma, m_ref.sigma)});
  return rows;
}

}  // namespace topopt
