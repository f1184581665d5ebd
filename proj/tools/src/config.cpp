#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "smolsens/error.hpp"

namespace smolsens::app {

namespace {

std::string where(const YAML::Mark& m) {
  if (m.is_null()) return "";
  return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ": ";
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& msg) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) throw ConfigError(msg);
  throw ConfigError(where(m) + msg, m.line + 1, m.column + 1);
}

void require_map(const YAML::Node& node, const std::string& name) {
  if (!node.IsMap()) fail(node, "'" + name + "' must be a mapping");
}

void check_keys(const YAML::Node& node, const std::string& section,
                std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      fail(kv.first, "unknown key '" + key + "' in " + section + " (allowed: " + list + ")");
    }
  }
}

double as_double(const YAML::Node& node, const std::string& name) {
  if (!node.IsScalar()) fail(node, "'" + name + "' must be a number");
  try {
    return parse_double(node.Scalar());
  } catch (const FormatError&) {
    fail(node, "'" + name + "' must be a number, got '" + node.Scalar() + "'");
  }
}

std::int64_t as_int(const YAML::Node& node, const std::string& name) {
  const double v = as_double(node, name);
  if (v != std::floor(v) || std::fabs(v) > 9.0e15) fail(node, "'" + name + "' must be an integer");
  return static_cast<std::int64_t>(v);
}

double positive(const YAML::Node& node, const std::string& name) {
  const double v = as_double(node, name);
  if (!(v > 0.0)) fail(node, "'" + name + "' must be positive");
  return v;
}

std::vector<double> as_list(const YAML::Node& node, const std::string& name) {
  if (!node.IsSequence()) fail(node, "'" + name + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& item : node) out.push_back(as_double(item, name));
  return out;
}

Scenario parse_scenario(const YAML::Node& node) {
  if (!node.IsScalar()) fail(node, "'scenario' must be a string");
  const std::string s = node.Scalar();
  for (Scenario sc : {Scenario::forward, Scenario::sensitivity, Scenario::representation,
                      Scenario::truncation, Scenario::mlsim, Scenario::coupled_fd,
                      Scenario::validate_all})
    if (to_string(sc) == s) return sc;
  fail(node, "unknown scenario '" + s +
                 "' (expected forward, sensitivity, representation, truncation, mlsim, "
                 "coupled-fd or validate-all)");
}

void parse_kernel(const YAML::Node& node, KernelConfig& k) {
  require_map(node, "kernel");
  check_keys(node, "kernel", {"family", "lambda", "param_box", "phi_scale"});
  if (!node["family"]) fail(node, "kernel.family is required");
  try {
    k.spec.family = parse_kernel_family(node["family"].as<std::string>());
  } catch (const std::exception& e) {
    fail(node["family"], e.what());
  }
  const std::size_t p = family_param_dim(k.spec.family);
  if (!node["lambda"]) fail(node, "kernel.lambda is required");
  const YAML::Node lam = node["lambda"];
  k.lambda = lam.IsSequence() ? as_list(lam, "kernel.lambda")
                              : std::vector<double>{as_double(lam, "kernel.lambda")};
  if (k.lambda.size() != p)
    fail(lam, "kernel.lambda needs " + std::to_string(p) + " component(s) for family '" +
                  to_string(k.spec.family) + "'");
  if (!node["param_box"]) fail(node, "kernel.param_box is required");
  const YAML::Node box = node["param_box"];
  if (!box.IsSequence()) fail(box, "kernel.param_box must be a list of [lo, hi] pairs");
  k.spec.param_box.clear();
  for (const auto& iv : box) {
    const auto pairv = as_list(iv, "kernel.param_box entry");
    if (pairv.size() != 2) fail(iv, "kernel.param_box entries must be [lo, hi]");
    k.spec.param_box.emplace_back(pairv[0], pairv[1]);
  }
  try {
    validate_kernel_spec(k.spec);
  } catch (const SpecError& e) {
    fail(box, e.what());
  }
  for (std::size_t m = 0; m < p; ++m)
    if (k.lambda[m] < k.spec.param_box[m].first || k.lambda[m] > k.spec.param_box[m].second)
      fail(lam, "kernel.lambda component " + std::to_string(m) + " lies outside param_box");
  if (node["phi_scale"]) {
    k.phi_scale = positive(node["phi_scale"], "kernel.phi_scale");
  }
}

void parse_initial(const YAML::Node& node, RunConfig& cfg) {
  if (node.IsScalar()) {
    if (node.Scalar() != "monodisperse")
      fail(node, "'initial' must be 'monodisperse' or a list of 'mass:weight' entries");
    cfg.initial.clear();
    return;
  }
  if (!node.IsSequence() || node.size() == 0)
    fail(node, "'initial' must be 'monodisperse' or a non-empty list of 'mass:weight' entries");
  for (const auto& item : node) {
    std::string mass_text;
    std::string weight_text;
    if (item.IsScalar()) {
      const std::string s = item.Scalar();
      const auto colon = s.find(':');
      if (colon == std::string::npos) fail(item, "initial entry '" + s + "' is not 'mass:weight'");
      mass_text = s.substr(0, colon);
      weight_text = s.substr(colon + 1);
    } else if (item.IsMap() && item.size() == 1) {
      mass_text = item.begin()->first.Scalar();
      weight_text = item.begin()->second.Scalar();
    } else {
      fail(item, "initial entries must be 'mass:weight'");
    }
    double mass = 0.0;
    double weight = 0.0;
    try {
      mass = parse_double(mass_text);
      weight = parse_double(weight_text);
    } catch (const FormatError&) {
      fail(item, "initial entry must hold numbers as 'mass:weight'");
    }
    if (mass < 1.0 || mass != std::floor(mass)) fail(item, "initial mass must be a positive integer");
    if (!(weight >= 0.0) || !std::isfinite(weight)) fail(item, "initial weight must be non-negative");
    cfg.initial.emplace_back(static_cast<Mass>(mass), weight);
  }
}

void parse_solver(const YAML::Node& node, SolveOptions& o) {
  require_map(node, "solver");
  check_keys(node, "solver",
             {"rel_tol", "abs_tol", "dt_checkpoint", "epsilon", "moment_ceiling",
              "overflow_fraction_max", "max_step"});
  if (node["rel_tol"]) o.rel_tol = positive(node["rel_tol"], "solver.rel_tol");
  if (node["abs_tol"]) o.abs_tol = positive(node["abs_tol"], "solver.abs_tol");
  if (node["dt_checkpoint"]) o.dt_checkpoint = positive(node["dt_checkpoint"], "solver.dt_checkpoint");
  if (node["epsilon"]) o.epsilon = positive(node["epsilon"], "solver.epsilon");
  if (node["moment_ceiling"]) o.moment_ceiling = positive(node["moment_ceiling"], "solver.moment_ceiling");
  if (node["overflow_fraction_max"])
    o.overflow_fraction_max = positive(node["overflow_fraction_max"], "solver.overflow_fraction_max");
  if (node["max_step"]) o.max_step = positive(node["max_step"], "solver.max_step");
}

void parse_stochastic(const YAML::Node& node, StochasticConfig& s) {
  require_map(node, "stochastic");
  check_keys(node, "stochastic", {"n", "seed", "replicas", "h", "threads"});
  if (node["n"]) {
    s.n = as_int(node["n"], "stochastic.n");
    if (s.n < 2) fail(node["n"], "stochastic.n must be at least 2");
  }
  if (node["seed"]) {
    const auto v = as_int(node["seed"], "stochastic.seed");
    if (v < 0) fail(node["seed"], "stochastic.seed must be non-negative");
    s.seed = static_cast<std::uint64_t>(v);
  }
  if (node["replicas"]) {
    const auto v = as_int(node["replicas"], "stochastic.replicas");
    if (v < 1) fail(node["replicas"], "stochastic.replicas must be at least 1");
    s.replicas = static_cast<std::size_t>(v);
  }
  if (node["h"]) s.h = positive(node["h"], "stochastic.h");
  if (node["threads"]) {
    const auto v = as_int(node["threads"], "stochastic.threads");
    if (v < 0) fail(node["threads"], "stochastic.threads must be non-negative");
    s.threads = static_cast<std::size_t>(v);
  }
}

void parse_analysis(const YAML::Node& node, AnalysisConfig& a) {
  require_map(node, "analysis");
  check_keys(node, "analysis", {"times", "truncation_levels", "param_index", "tolerance", "fd_h"});
  if (node["times"]) {
    a.times = as_list(node["times"], "analysis.times");
    for (std::size_t i = 0; i < a.times.size(); ++i)
      if (a.times[i] < 0.0 || (i > 0 && !(a.times[i] > a.times[i - 1])))
        fail(node["times"], "analysis.times must be non-negative and increasing");
  }
  if (node["truncation_levels"]) {
    a.truncation_levels = as_list(node["truncation_levels"], "analysis.truncation_levels");
    for (std::size_t i = 0; i < a.truncation_levels.size(); ++i)
      if (!(a.truncation_levels[i] > 0.0) ||
          (i > 0 && !(a.truncation_levels[i] > a.truncation_levels[i - 1])))
        fail(node["truncation_levels"], "analysis.truncation_levels must be positive and increasing");
  }
  if (node["param_index"]) {
    const auto v = as_int(node["param_index"], "analysis.param_index");
    if (v < 0) fail(node["param_index"], "analysis.param_index must be non-negative");
    a.param_index = static_cast<std::size_t>(v);
  }
  if (node["tolerance"]) a.tolerance = positive(node["tolerance"], "analysis.tolerance");
  if (node["fd_h"]) a.fd_h = positive(node["fd_h"], "analysis.fd_h");
}

}  // namespace

ConfigError::ConfigError(const std::string& what, int line, int column)
    : std::runtime_error(what), line_(line), column_(column) {}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::forward:
      return "forward";
    case Scenario::sensitivity:
      return "sensitivity";
    case Scenario::representation:
      return "representation";
    case Scenario::truncation:
      return "truncation";
    case Scenario::mlsim:
      return "mlsim";
    case Scenario::coupled_fd:
      return "coupled-fd";
    case Scenario::validate_all:
      return "validate-all";
  }
  return "?";
}

GridMeasure RunConfig::initial_measure() const {
  if (initial.empty()) return GridMeasure::dirac(n_max, 1);
  GridMeasure mu(n_max);
  for (const auto& [m, w] : initial) mu[m] += w;
  return mu;
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(e.mark) + "malformed YAML: " + e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a YAML mapping", 1, 1);
  check_keys(root, "the top level",
             {"scenario", "kernel", "initial", "grid", "horizon", "solver", "stochastic",
              "analysis", "output"});

  RunConfig cfg;
  if (!root["scenario"]) fail(root, "'scenario' is required");
  cfg.scenario = parse_scenario(root["scenario"]);

  if (root["grid"]) {
    const YAML::Node g = root["grid"];
    require_map(g, "grid");
    check_keys(g, "grid", {"n_max"});
    if (g["n_max"]) {
      const auto v = as_int(g["n_max"], "grid.n_max");
      if (v < 2 || v > 4096) fail(g["n_max"], "grid.n_max must lie in [2, 4096]");
      cfg.n_max = static_cast<std::size_t>(v);
    }
  }

  if (!root["kernel"]) fail(root, "'kernel' is required");
  parse_kernel(root["kernel"], cfg.kernel);

  if (root["initial"]) {
    parse_initial(root["initial"], cfg);
    for (const auto& [m, w] : cfg.initial)
      if (static_cast<std::size_t>(m) > cfg.n_max)
        fail(root["initial"], "initial mass " + std::to_string(m) + " exceeds grid.n_max");
  }

  if (root["horizon"]) {
    cfg.horizon = as_double(root["horizon"], "horizon");
    if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon))
      fail(root["horizon"], "'horizon' must be a finite non-negative number");
  }
  if (root["solver"]) parse_solver(root["solver"], cfg.solver);
  if (root["stochastic"]) parse_stochastic(root["stochastic"], cfg.stochastic);
  if (root["analysis"]) parse_analysis(root["analysis"], cfg.analysis);
  if (root["output"]) {
    if (!root["output"].IsScalar()) fail(root["output"], "'output' must be a path");
    cfg.output = root["output"].Scalar();
  }

  if (cfg.analysis.param_index >= cfg.kernel.lambda.size())
    fail(root["analysis"] ? root["analysis"] : root,
         "analysis.param_index exceeds the kernel parameter dimension");
  for (double t : cfg.analysis.times)
    if (t > cfg.horizon)
      fail(root["analysis"]["times"], "analysis.times must not exceed the horizon");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read configuration file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_overrides(RunConfig& cfg, const std::uint64_t* seed, const std::size_t* checkpoints) {
  if (seed != nullptr) cfg.stochastic.seed = *seed;
  if (checkpoints != nullptr) {
    if (*checkpoints == 0) throw ConfigError("--checkpoints must be positive");
    if (cfg.horizon > 0.0) cfg.solver.dt_checkpoint = cfg.horizon / static_cast<double>(*checkpoints);
  }
}

}  // namespace smolsens::app
