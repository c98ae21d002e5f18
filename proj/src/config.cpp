#include "topopt/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "topopt/errors.hpp"

namespace topopt {
namespace {

using nlohmann::json;

// Tracks which keys of a JSON object were consumed; finish() rejects leftovers so
// typos never silently fall back to defaults.
class ObjReader {
 public:
  ObjReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) throw ConfigError("missing required key: " + sub(key));
    return *it;
  }

  const json* opt(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void require(const std::string& key, std::vector<std::string>& missing) {
    seen_.insert(key);
    if (!j_.contains(key)) missing.push_back(sub(key));
  }

  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key: " + sub(it.key()));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path + ": expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path + ": expected a string");
  return v.get<std::string>();
}

MeshSize parse_mesh(const json& v, const std::string& path) {
  ObjReader r(v, path);
  MeshSize m;
  m.nx = as_int(r.get("nx"), r.sub("nx"));
  m.ny = as_int(r.get("ny"), r.sub("ny"));
  r.finish();
  if (m.nx < 1 || m.ny < 1) throw ConfigError(path + ": nx and ny must be >= 1");
  return m;
}

}  // namespace

RunConfig parse_config_json(const json& j) {
  RunConfig cfg;
  ObjReader top(j, "");

  std::vector<std::string> missing;
  top.require("benchmark", missing);
  top.require("fine_mesh", missing);
  top.require("vbar", missing);
  top.require("lambda", missing);
  top.require("filter_radius", missing);
  if (!missing.empty()) {
    std::string msg = "missing required key";
    if (missing.size() > 1) msg += "s";
    msg += ": ";
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i) msg += ", ";
      msg += missing[i];
    }
    throw ConfigError(msg);
  }

  cfg.benchmark = as_string(top.get("benchmark"), "benchmark");
  if (cfg.benchmark != "carrier_plate" && cfg.benchmark != "l_bracket") {
    throw ConfigError("benchmark: must be \"carrier_plate\" or \"l_bracket\", got \"" +
                      cfg.benchmark + "\"");
  }

  cfg.fine_mesh = parse_mesh(top.get("fine_mesh"), "fine_mesh");
  if (const json* v = top.opt("coarse_mesh")) cfg.coarse_mesh = parse_mesh(*v, "coarse_mesh");

  if (const json* v = top.opt("uncertainty")) {
    const std::string s = as_string(*v, "uncertainty");
    if (s == "none") cfg.uncertainty = UncertaintyKind::none;
    else if (s == "loading") cfg.uncertainty = UncertaintyKind::loading;
    else if (s == "geometric") cfg.uncertainty = UncertaintyKind::geometric;
    else throw ConfigError("uncertainty: must be \"none\", \"loading\" or \"geometric\"");
  }

  // Benchmark presets for the random-field model; an explicit "kl" block overrides.
  if (cfg.benchmark == "carrier_plate") {
    cfg.lc = 0.2;
    cfg.n_modes = 10;
  } else {
    cfg.lc = 0.85;
    cfg.n_modes = 4;
  }

  if (const json* v = top.opt("kl")) {
    if (cfg.uncertainty == UncertaintyKind::none)
      throw ConfigError("kl: only valid when uncertainty is not \"none\"");
    ObjReader r(*v, "kl");
    if (const json* x = r.opt("lc")) cfg.lc = as_number(*x, r.sub("lc"));
    if (const json* x = r.opt("n_modes")) cfg.n_modes = as_int(*x, r.sub("n_modes"));
    if (const json* x = r.opt("gamma0")) cfg.gamma0 = as_number(*x, r.sub("gamma0"));
    if (const json* x = r.opt("a1")) cfg.a1 = as_number(*x, r.sub("a1"));
    if (const json* x = r.opt("a2")) cfg.a2 = as_number(*x, r.sub("a2"));
    r.finish();
    if (cfg.lc <= 0.0) throw ConfigError("kl.lc: must be > 0");
    if (cfg.n_modes < 1) throw ConfigError("kl.n_modes: must be >= 1");
  }

  if (const json* v = top.opt("sampling")) {
    if (cfg.uncertainty == UncertaintyKind::none)
      throw ConfigError("sampling: only valid when uncertainty is not \"none\"");
    ObjReader r(*v, "sampling");
    const std::string kind = as_string(r.get("kind"), r.sub("kind"));
    if (kind == "monte_carlo") {
      cfg.sampling_kind = SampleKind::monte_carlo;
      cfg.sample_count = as_int(r.get("count"), r.sub("count"));
      if (cfg.sample_count < 1) throw ConfigError("sampling.count: must be >= 1");
      const json& s = r.get("seed");
      if (!s.is_number_integer() || s.get<long long>() < 0)
        throw ConfigError("sampling.seed: expected a non-negative integer");
      cfg.seed = s.get<std::uint64_t>();
      cfg.seed_set = true;
    } else if (kind == "sparse_grid") {
      cfg.sampling_kind = SampleKind::sparse_grid;
      cfg.level = as_int(r.get("level"), r.sub("level"));
      if (cfg.level < 1) throw ConfigError("sampling.level: must be >= 1");
    } else if (kind == "tensor_gauss") {
      cfg.sampling_kind = SampleKind::tensor_gauss;
      cfg.points_per_dim = as_int(r.get("points_per_dim"), r.sub("points_per_dim"));
      if (cfg.points_per_dim < 1) throw ConfigError("sampling.points_per_dim: must be >= 1");
    } else {
      throw ConfigError(
          "sampling.kind: must be \"monte_carlo\", \"sparse_grid\" or \"tensor_gauss\"");
    }
    r.finish();
  } else if (cfg.uncertainty != UncertaintyKind::none) {
    throw ConfigError("missing required key: sampling (uncertainty is not \"none\")");
  }

  cfg.vbar = as_number(top.get("vbar"), "vbar");
  if (!(cfg.vbar > 0.0 && cfg.vbar < 1.0)) throw ConfigError("vbar: must lie in (0, 1)");
  cfg.lambda = as_number(top.get("lambda"), "lambda");
  if (cfg.lambda < 0.0) throw ConfigError("lambda: must be >= 0");
  cfg.filter_radius = as_number(top.get("filter_radius"), "filter_radius");
  if (!(cfg.filter_radius > 0.0)) throw ConfigError("filter_radius: must be > 0");

  if (const json* v = top.opt("coarse_filter_radius")) {
    cfg.coarse_filter_radius = as_number(*v, "coarse_filter_radius");
    if (!(cfg.coarse_filter_radius > 0.0))
      throw ConfigError("coarse_filter_radius: must be > 0");
    if (!cfg.coarse_mesh.present())
      throw ConfigError("coarse_filter_radius: requires coarse_mesh");
  }

  if (const json* v = top.opt("n_important")) {
    if (v->is_string()) {
      if (v->get<std::string>() != "rank")
        throw ConfigError("n_important: must be a positive integer or \"rank\"");
      cfg.n_important = -1;
    } else {
      cfg.n_important = as_int(*v, "n_important");
      if (cfg.n_important < 1)
        throw ConfigError("n_important: must be a positive integer or \"rank\"");
    }
  }

  if (const json* v = top.opt("beta")) {
    cfg.beta = as_number(*v, "beta");
    if (!(cfg.beta > 0.0)) throw ConfigError("beta: must be > 0");
  }
  if (const json* v = top.opt("tau")) {
    cfg.tau = as_number(*v, "tau");
    if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) throw ConfigError("tau: must lie in [0, 1]");
  }
  if (const json* v = top.opt("iota")) {
    cfg.iota = as_number(*v, "iota");
    if (!(cfg.iota >= 1.0)) throw ConfigError("iota: must be >= 1");
  }
  if (const json* v = top.opt("max_iters")) {
    cfg.max_iters = as_int(*v, "max_iters");
    if (cfg.max_iters < 1) throw ConfigError("max_iters: must be >= 1");
  }
  if (const json* v = top.opt("output_dir")) cfg.output_dir = as_string(*v, "output_dir");
  if (const json* v = top.opt("certify")) cfg.certify = as_bool(*v, "certify");
  if (const json* v = top.opt("certify_element")) {
    cfg.certify_element = as_string(*v, "certify_element");
    if (cfg.certify_element != "max_sensitivity" && cfg.certify_element != "bottom_left")
      throw ConfigError("certify_element: must be \"max_sensitivity\" or \"bottom_left\"");
  }
  if (const json* v = top.opt("probes")) {
    cfg.probes = as_int(*v, "probes");
    if (cfg.probes < 1) throw ConfigError("probes: must be >= 1");
  }
  if (const json* v = top.opt("reuse_important")) {
    cfg.reuse_important = as_int(*v, "reuse_important");
    if (cfg.reuse_important < 1) throw ConfigError("reuse_important: must be >= 1");
  }
  if (const json* v = top.opt("beta_continuation"))
    cfg.beta_continuation = as_bool(*v, "beta_continuation");
  if (const json* v = top.opt("gd_fallback")) cfg.gd_fallback = as_bool(*v, "gd_fallback");
  if (const json* v = top.opt("f2")) {
    cfg.f2 = as_number(*v, "f2");
    if (!(cfg.f2 >= 0.0)) throw ConfigError("f2: must be >= 0");
  }
  if (const json* v = top.opt("point_load")) {
    cfg.point_load = as_number(*v, "point_load");
    if (!(cfg.point_load > 0.0)) throw ConfigError("point_load: must be > 0");
  }
  if (const json* v = top.opt("element_size")) {
    cfg.element_size = as_number(*v, "element_size");
    if (!(cfg.element_size > 0.0)) throw ConfigError("element_size: must be > 0");
  }
  top.finish();

  // Cross-field consistency.
  if (cfg.benchmark == "l_bracket") {
    auto check_bracket = [](const MeshSize& m, const std::string& path) {
      if (m.nx != m.ny) throw ConfigError(path + ": l_bracket requires nx == ny");
      if (m.nx % 5 != 0) throw ConfigError(path + ": l_bracket requires nx divisible by 5");
    };
    check_bracket(cfg.fine_mesh, "fine_mesh");
    if (cfg.coarse_mesh.present()) check_bracket(cfg.coarse_mesh, "coarse_mesh");
    if (cfg.uncertainty == UncertaintyKind::loading)
      throw ConfigError("uncertainty: \"loading\" is not supported on the l_bracket benchmark");
  }
  if (cfg.coarse_mesh.present()) {
    if (cfg.fine_mesh.nx % cfg.coarse_mesh.nx != 0 ||
        cfg.fine_mesh.ny % cfg.coarse_mesh.ny != 0)
      throw ConfigError("coarse_mesh: fine mesh dimensions must be integer multiples");
    if (cfg.fine_mesh.nx / cfg.coarse_mesh.nx != cfg.fine_mesh.ny / cfg.coarse_mesh.ny)
      throw ConfigError("coarse_mesh: nx and ny refinement ratios must match");
    if (cfg.coarse_filter_radius == 0.0) {
      cfg.coarse_filter_radius =
          std::max(1.05, cfg.filter_radius * static_cast<double>(cfg.coarse_mesh.nx) /
                             static_cast<double>(cfg.fine_mesh.nx));
    }
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json j;
  j["benchmark"] = cfg.benchmark;
  j["fine_mesh"] = {{"nx", cfg.fine_mesh.nx}, {"ny", cfg.fine_mesh.ny}};
  if (cfg.coarse_mesh.present())
    j["coarse_mesh"] = {{"nx", cfg.coarse_mesh.nx}, {"ny", cfg.coarse_mesh.ny}};
  switch (cfg.uncertainty) {
    case UncertaintyKind::none: j["uncertainty"] = "none"; break;
    case UncertaintyKind::loading: j["uncertainty"] = "loading"; break;
    case UncertaintyKind::geometric: j["uncertainty"] = "geometric"; break;
  }
  if (cfg.uncertainty != UncertaintyKind::none) {
    j["kl"] = {{"lc", cfg.lc}, {"n_modes", cfg.n_modes}, {"gamma0", cfg.gamma0},
               {"a1", cfg.a1}, {"a2", cfg.a2}};
    json s;
    switch (cfg.sampling_kind) {
      case SampleKind::monte_carlo:
        s = {{"kind", "monte_carlo"}, {"count", cfg.sample_count}, {"seed", cfg.seed}};
        break;
      case SampleKind::sparse_grid:
        s = {{"kind", "sparse_grid"}, {"level", cfg.level}};
        break;
      case SampleKind::tensor_gauss:
        s = {{"kind", "tensor_gauss"}, {"points_per_dim", cfg.points_per_dim}};
        break;
    }
    j["sampling"] = s;
  }
  j["vbar"] = cfg.vbar;
  j["lambda"] = cfg.lambda;
  j["filter_radius"] = cfg.filter_radius;
  if (cfg.coarse_mesh.present()) j["coarse_filter_radius"] = cfg.coarse_filter_radius;
  if (cfg.n_important > 0) j["n_important"] = cfg.n_important;
  else j["n_important"] = "rank";
  j["beta"] = cfg.beta;
  j["tau"] = cfg.tau;
  j["iota"] = cfg.iota;
  j["max_iters"] = cfg.max_iters;
  j["output_dir"] = cfg.output_dir;
  j["certify"] = cfg.certify;
  j["certify_element"] = cfg.certify_element;
  j["probes"] = cfg.probes;
  j["reuse_important"] = cfg.reuse_important;
  j["beta_continuation"] = cfg.beta_continuation;
  j["gd_fallback"] = cfg.gd_fallback;
  j["f2"] = cfg.f2;
  j["point_load"] = cfg.point_load;
  j["element_size"] = cfg.element_size;
  return j;
}

}  // namespace topopt
