#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "topopt/problem.hpp"
#include "topopt/sampling.hpp"

namespace topopt {

struct MeshSize {
  int nx = 0, ny = 0;
  bool present() const { return nx > 0; }
};

// Validated run description. Unknown keys, missing required keys, type errors, and
// inconsistent combinations are all rejected at parse time with the offending key path.
struct RunConfig {
  std::string benchmark;  // "carrier_plate" | "l_bracket"
  MeshSize fine_mesh, coarse_mesh;
  UncertaintyKind uncertainty = UncertaintyKind::none;

  // random-field model (preset defaults: carrier lc=0.2 n=10; l_bracket lc=0.85 n=4)
  double lc = 0.0;
  int n_modes = 0;
  double gamma0 = 0.0;
  double a1 = 0.1, a2 = 0.45;

  SampleKind sampling_kind = SampleKind::monte_carlo;
  int sample_count = 0;     // monte_carlo
  int level = 0;            // sparse_grid
  int points_per_dim = 0;   // tensor_gauss
  std::uint64_t seed = 0;
  bool seed_set = false;

  int n_important = -1;  // -1: numerical rank
  double lambda = 0.0;
  double vbar = 0.0;
  double filter_radius = 0.0;
  double coarse_filter_radius = 0.0;  // derived when absent
  double beta = 8.0, tau = 0.5, iota = 3.0;
  int max_iters = 500;
  std::string output_dir = "out";
  bool certify = false;
  std::string certify_element = "max_sensitivity";  // or "bottom_left"
  int probes = 3;
  int reuse_important = 1;
  bool beta_continuation = false;
  bool gd_fallback = false;
  double f2 = 2.0, point_load = 1.0, element_size = 1.0;
};

RunConfig parse_config_json(const nlohmann::json& j);
RunConfig parse_config_file(const std::string& path);

// Canonical echo of the validated configuration (written into run_info.json).
nlohmann::json config_to_json(const RunConfig& cfg);

}  // namespace topopt
