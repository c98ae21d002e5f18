#include "topopt/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "topopt/errors.hpp"
#include "topopt/version.hpp"

namespace topopt {
namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file for writing: " + path);
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Weighted mean/std maps of the projected field over the sample set.
void density_stats(ResolutionModel& model, Eigen::VectorXd& mean, Eigen::VectorXd& stdev) {
  const int na = model.mesh.n_active();
  mean = Eigen::VectorXd::Zero(na);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(na);
  for (int i = 0; i < model.n_samples(); ++i) {
    const double w = model.sample_weights(i);
    const Eigen::VectorXd& rb = model.rho_bar_of(i);
    mean += w * rb;
    second += w * rb.cwiseProduct(rb);
  }
  stdev = (second - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
}

void write_run_info(const std::string& path, const char* command, const RunConfig& cfg,
                    const RunResult& res) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["command"] = command;
  j["config"] = config_to_json(cfg);
  j["timings_s"] = {{"coarse_solves", res.timings.coarse_solves_s},
                    {"fine_solves", res.timings.fine_solves_s},
                    {"qr", res.timings.qr_s},
                    {"lift", res.timings.lift_s},
                    {"total", res.timings.total_s}};
  j["iterations"] = static_cast<int>(res.history.size());
  j["converged"] = res.converged;
  j["last_rank"] = res.last_rank;
  j["last_n_important"] = res.last_n_important;
  if (!res.history.empty()) {
    const IterationRecord& last = res.history.back();
    long long hi = 0;
    for (const IterationRecord& r : res.history) hi += r.n_hi_solves;
    j["final"] = {{"Q", last.Q},     {"mu", last.mu},         {"sigma", last.sigma},
                  {"volume", last.volume}, {"change", last.change}};
    j["total_hi_res_solves"] = hi;
  }
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_design_artifacts(const std::string& out_dir, ResolutionModel& fine,
                            const RunResult& res) {
  write_raw_density_csv(fine.mesh, res.rho, join(out_dir, "rho_raw.csv"));
  fine.set_design(res.rho);
  if (fine.spec.uncertainty == UncertaintyKind::geometric) {
    Eigen::VectorXd mean, stdev;
    density_stats(fine, mean, stdev);
    write_density_pgm(fine.mesh, mean, join(out_dir, "density.pgm"));
    write_density_pgm(fine.mesh, stdev, join(out_dir, "density_std.pgm"));
  } else {
    write_density_pgm(fine.mesh, fine.rho_bar_of(0), join(out_dir, "density.pgm"));
  }
}

}  // namespace

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_density_pgm(const Mesh& mesh, const Eigen::VectorXd& rho_bar_active,
                       const std::string& path) {
  if (rho_bar_active.size() != mesh.n_active())
    throw ConfigError("write_density_pgm: field size does not match active element count");
  std::ofstream out = open_out(path);
  out << "P2\n" << mesh.nx << " " << mesh.ny << "\n255\n";
  for (int iy = mesh.ny - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < mesh.nx; ++ix) {
      const int e = iy * mesh.nx + ix;
      int v = 0;
      const int slot = mesh.active_index[e];
      if (slot >= 0) {
        const double r = std::clamp(rho_bar_active(slot), 0.0, 1.0);
        v = static_cast<int>(std::lround(255.0 * r));
      }
      out << v << (ix + 1 == mesh.nx ? "" : " ");
    }
    out << "\n";
  }
}

void write_history_csv(const std::vector<IterationRecord>& history, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "iter,Q,mu,sigma,volume,change,n_hi_solves\n";
  for (const IterationRecord& r : history) {
    out << r.iter << "," << format_g17(r.Q) << "," << format_g17(r.mu) << ","
        << format_g17(r.sigma) << "," << format_g17(r.volume) << ","
        << format_g17(r.change) << "," << r.n_hi_solves << "\n";
  }
}

void write_certificate_csv(const std::vector<IterationRecord>& history,
                           const std::vector<Certificate>& certs, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "iter,epsilon,delta,sigma_max_GH,bound_u,actual_u,bound_C,actual_C,bound_dC,"
         "actual_dC\n";
  for (std::size_t k = 0; k < certs.size(); ++k) {
    const int iter = k < history.size() ? history[k].iter : static_cast<int>(k) + 1;
    const Certificate& c = certs[k];
    out << iter << "," << format_g17(c.epsilon) << "," << format_g17(c.delta) << ","
        << format_g17(c.sigma_max_GH) << "," << format_g17(c.bound_u) << ","
        << format_g17(c.actual_u) << "," << format_g17(c.bound_C) << ","
        << format_g17(c.actual_C) << "," << format_g17(c.bound_dC) << ","
        << format_g17(c.actual_dC) << "\n";
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "n,err_u,err_C,err_dC\n";
  for (const SweepRow& r : rows) {
    out << r.n << "," << format_g17(r.err_u) << "," << format_g17(r.err_C) << ","
        << format_g17(r.err_dC) << "\n";
  }
}

void write_stress_csv(const std::vector<StressRow>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "method,n_hi,mean_err,std_err\n";
  for (const StressRow& r : rows) {
    out << r.method << "," << r.n_hi << "," << format_g17(r.mean_err) << ","
        << format_g17(r.std_err) << "\n";
  }
}

void write_raw_density_csv(const Mesh& mesh, const Eigen::VectorXd& rho_raw,
                           const std::string& path) {
  if (rho_raw.size() != mesh.n_active())
    throw ConfigError("write_raw_density_csv: field size does not match active count");
  std::ofstream out = open_out(path);
  out << "elem,ex,ey,rho\n";
  for (int slot = 0; slot < mesh.n_active(); ++slot) {
    const int e = mesh.active_elems[slot];
    out << e << "," << e % mesh.nx << "," << e / mesh.nx << "," << format_g17(rho_raw(slot))
        << "\n";
  }
}

BuiltProblem build_problem(const RunConfig& cfg) {
  BuiltProblem bp;
  bp.cfg = cfg;

  const DomainShape shape =
      cfg.benchmark == "l_bracket" ? DomainShape::l_bracket : DomainShape::rectangle;
  const BcPreset bc = cfg.benchmark == "l_bracket" ? BcPreset::lbracket : BcPreset::carrier;

  Mesh fine_mesh = build_mesh(cfg.fine_mesh.nx, cfg.fine_mesh.ny, shape, bc, cfg.element_size);

  ProblemSpec spec;
  spec.uncertainty = cfg.uncertainty;
  spec.f2 = cfg.f2;
  spec.point_load = cfg.point_load;
  spec.beta = cfg.beta;
  spec.tau = cfg.tau;
  spec.iota = cfg.iota;
  spec.a1 = cfg.a1;
  spec.a2 = cfg.a2;

  KLModel field;
  const KLModel* field_ptr = nullptr;
  if (cfg.uncertainty == UncertaintyKind::loading) {
    field = build_load_model(cfg.fine_mesh.nx, cfg.lc, cfg.n_modes, cfg.gamma0);
    field_ptr = &field;
  } else if (cfg.uncertainty == UncertaintyKind::geometric) {
    field = build_threshold_model(cfg.fine_mesh.nx, cfg.fine_mesh.ny, cfg.lc, cfg.n_modes,
                                  cfg.gamma0);
    field_ptr = &field;
  }

  bp.fine = std::make_unique<ResolutionModel>(std::move(fine_mesh), cfg.filter_radius, spec,
                                              field_ptr);
  if (cfg.coarse_mesh.present()) {
    const double coarse_h =
        cfg.element_size * static_cast<double>(cfg.fine_mesh.nx) / cfg.coarse_mesh.nx;
    Mesh coarse_mesh = build_mesh(cfg.coarse_mesh.nx, cfg.coarse_mesh.ny, shape, bc, coarse_h);
    bp.coarse = std::make_unique<ResolutionModel>(std::move(coarse_mesh),
                                                  cfg.coarse_filter_radius, spec, field_ptr);
  }

  if (cfg.uncertainty == UncertaintyKind::none) {
    bp.samples.points = Eigen::MatrixXd::Zero(1, 0);
    bp.samples.weights = Eigen::VectorXd::Ones(1);
    bp.samples.kind = SampleKind::tensor_gauss;
  } else {
    switch (cfg.sampling_kind) {
      case SampleKind::monte_carlo:
        bp.samples = monte_carlo(cfg.n_modes, cfg.sample_count, cfg.seed);
        break;
      case SampleKind::sparse_grid:
        bp.samples = sparse_grid(cfg.n_modes, cfg.level);
        break;
      case SampleKind::tensor_gauss:
        bp.samples = tensor_gauss(cfg.n_modes, cfg.points_per_dim);
        break;
    }
  }
  bp.fine->set_samples(bp.samples.points, bp.samples.weights);
  if (bp.coarse) bp.coarse->set_samples(bp.samples.points, bp.samples.weights);
  return bp;
}

RunParams run_params_from(const RunConfig& cfg, const Mesh& fine_mesh) {
  RunParams prm;
  prm.lambda = cfg.lambda;
  prm.vbar = cfg.vbar;
  prm.max_iters = cfg.max_iters;
  prm.n_important = cfg.n_important;
  prm.probes = cfg.probes;
  prm.certify = cfg.certify;
  prm.reuse_important = cfg.reuse_important;
  prm.beta_continuation = cfg.beta_continuation;
  prm.gd_fallback = cfg.gd_fallback;
  if (cfg.certify_element == "bottom_left") {
    const int slot = fine_mesh.active_index[0];  // element (0, 0)
    if (slot < 0) throw ConfigError("certify_element: bottom-left element is not active");
    prm.certify_slot = slot;
  }
  return prm;
}

void cmd_run(const RunConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  BuiltProblem bp = build_problem(cfg);
  RunParams prm = run_params_from(cfg, bp.fine->mesh);
  RunResult res = bp.coarse ? run_bifidelity(*bp.fine, *bp.coarse, prm)
                            : run_single_resolution(*bp.fine, prm);
  write_history_csv(res.history, join(out_dir, "history.csv"));
  if (!res.certificates.empty())
    write_certificate_csv(res.history, res.certificates, join(out_dir, "certificate.csv"));
  write_design_artifacts(out_dir, *bp.fine, res);
  write_run_info(join(out_dir, "run_info.json"), "run", cfg, res);
}

void cmd_sweep_n(const RunConfig& cfg, int n_max, const std::string& out_dir) {
  if (n_max < 1) throw ConfigError("--n-max: must be >= 1");
  ensure_dir(out_dir);
  BuiltProblem bp = build_problem(cfg);
  if (!bp.coarse) throw ConfigError("sweep-n requires coarse_mesh in the config");
  const Eigen::VectorXd rho = initial_design(bp.fine->mesh, cfg.vbar);
  std::vector<SweepRow> rows = sweep_important_count(*bp.fine, *bp.coarse, rho, n_max);
  write_sweep_csv(rows, join(out_dir, "sweep.csv"));
  RunResult empty;
  write_run_info(join(out_dir, "run_info.json"), "sweep-n", cfg, empty);
}

void cmd_certify(const RunConfig& cfg, int iter, const std::string& out_dir) {
  if (iter < 1) throw ConfigError("--iter: must be >= 1");
  ensure_dir(out_dir);
  BuiltProblem bp = build_problem(cfg);
  if (!bp.coarse) throw ConfigError("certify requires coarse_mesh in the config");
  RunParams prm = run_params_from(cfg, bp.fine->mesh);
  prm.certify = true;
  prm.max_iters = iter;
  prm.tol_change = 0.0;  // run exactly `iter` iterations
  RunResult res = run_bifidelity(*bp.fine, *bp.coarse, prm);
  write_certificate_csv(res.history, res.certificates, join(out_dir, "certificate.csv"));
  write_history_csv(res.history, join(out_dir, "history.csv"));
  write_run_info(join(out_dir, "run_info.json"), "certify", cfg, res);
}

void cmd_stress_study(const RunConfig& cfg, int mc_samples, int ref_level,
                      const std::string& out_dir) {
  if (mc_samples < 2) throw ConfigError("--mc-samples: must be >= 2");
  if (ref_level < 1) throw ConfigError("--ref-level: must be >= 1");
  ensure_dir(out_dir);
  BuiltProblem bp = build_problem(cfg);
  if (!bp.coarse) throw ConfigError("stress-study requires coarse_mesh in the config");
  if (cfg.uncertainty == UncertaintyKind::none)
    throw ConfigError("stress-study requires an uncertainty model");

  RunParams prm = run_params_from(cfg, bp.fine->mesh);
  RunResult res = run_bifidelity(*bp.fine, *bp.coarse, prm);
  const int n_imp = cfg.n_important > 0 ? cfg.n_important : res.last_n_important;
  const std::uint64_t mc_seed = cfg.seed_set ? cfg.seed + 1 : 9001ull;
  std::vector<StressRow> rows = stress_study(*bp.fine, *bp.coarse, res.rho, bp.samples,
                                             n_imp, mc_samples, mc_seed, ref_level);
  write_stress_csv(rows, join(out_dir, "stress.csv"));
  write_history_csv(res.history, join(out_dir, "history.csv"));
  write_design_artifacts(out_dir, *bp.fine, res);
  write_run_info(join(out_dir, "run_info.json"), "stress-study", cfg, res);
}

}  // namespace topopt
