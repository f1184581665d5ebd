#include "app.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "json.hpp"
#include "scenarios.hpp"
#include "smolsens/error.hpp"
#include "smolsens/forward.hpp"
#include "smolsens/validation.hpp"

#ifndef SMOLSENS_VERSION
#define SMOLSENS_VERSION "unknown"
#endif

namespace smolsens::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read configuration file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw SolverFault("sha256 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

void report_config_error(const fs::path& path, const ConfigError& e, std::ostream& err) {
  err << path.string() << ": error: " << e.what() << '\n';
}

// Loads, applies overrides. Returns the raw text for hashing.
RunConfig load(const RunRequest& req, std::string& text) {
  text = read_file(req.config);
  RunConfig cfg = parse_config(text);
  const std::uint64_t* seed = req.seed ? &*req.seed : nullptr;
  const std::size_t* cps = req.checkpoints ? &*req.checkpoints : nullptr;
  apply_overrides(cfg, seed, cps);
  return cfg;
}

json versions() {
  return {{"smolsens", SMOLSENS_VERSION},
          {"compiler", __VERSION__},
          {"cxx_standard", __cplusplus},
          {"openssl", OpenSSL_version(OPENSSL_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SolverFault("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace

fs::path resolve_output_dir(const std::optional<fs::path>& flag, const std::string& config_output) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SMOLSENS_OUTDIR"); env != nullptr && *env != '\0') return env;
  if (!config_output.empty()) return config_output;
  return "smolsens-out";
}

int command_run(const RunRequest& req, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  std::string text;
  RunConfig cfg;
  try {
    cfg = load(req, text);
  } catch (const ConfigError& e) {
    report_config_error(req.config, e, err);
    return exit_config;
  }
  const fs::path dir = resolve_output_dir(req.out, cfg.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    err << "error: cannot create output directory '" << dir.string() << "': " << ec.message() << '\n';
    return exit_check_failed;
  }

  json manifest = {{"scenario", to_string(cfg.scenario)},
                   {"config", fs::absolute(req.config).string()},
                   {"config_sha256", sha256_hex(text)},
                   {"seed", cfg.stochastic.seed},
                   {"dt_checkpoint", cfg.solver.dt_checkpoint},
                   {"versions", versions()}};
  int code = exit_ok;
  ScenarioResult result;
  std::string failure;
  try {
    result = run_scenario(cfg, dir);
    code = result.passed() ? exit_ok : exit_check_failed;
  } catch (const ConfigError& e) {
    report_config_error(req.config, e, err);
    return exit_config;
  } catch (const SpecError& e) {
    err << req.config.string() << ": error: " << e.what() << '\n';
    return exit_config;
  } catch (const BoxError& e) {
    err << req.config.string() << ": error: " << e.what() << '\n';
    return exit_config;
  } catch (const HypothesisError& e) {
    failure = e.what();
    code = exit_hypothesis;
  } catch (const BlowUpError& e) {
    failure = e.what();
    code = exit_blowup;
    manifest["failure_time"] = e.time();
  } catch (const NegativityError& e) {
    failure = e.what();
    code = exit_blowup;
    manifest["failure_time"] = e.time();
  } catch (const Error& e) {
    failure = e.what();
    code = exit_check_failed;
  }
  if (!failure.empty()) err << "error: " << failure << '\n';

  json checks = json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold},
                      {"passed", c.passed}, {"gating", c.gating}});
    out << (c.passed ? "[PASS] " : (c.gating ? "[FAIL] " : "[WARN] ")) << c.name << " = "
        << format_double(c.value) << " (threshold " << format_double(c.threshold) << ")\n";
  }
  json summary = result.summary;
  summary["checks"] = checks;
  summary["passed"] = code == exit_ok;
  summary["exit_code"] = code;
  if (!failure.empty()) summary["error"] = failure;
  write_json(dir / "summary.json", summary);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto artifacts = result.artifacts;
  artifacts.push_back("summary.json");
  manifest["artifacts"] = artifacts;
  manifest["wall_time_seconds"] = wall;
  manifest["exit_code"] = code;
  write_json(dir / "manifest.json", manifest);
  out << to_string(cfg.scenario) << ": " << (code == exit_ok ? "ok" : "failed") << " -> "
      << dir.string() << '\n';
  return code;
}

int command_validate(const RunRequest& req, std::ostream& out, std::ostream& err) {
  std::string text;
  RunConfig cfg;
  try {
    cfg = load(req, text);
  } catch (const ConfigError& e) {
    report_config_error(req.config, e, err);
    return exit_config;
  }
  const auto report = hypothesis_check(cfg.kernel.spec, cfg.kernel.lambda, cfg.phi(),
                                       cfg.initial_measure(), cfg.solver.epsilon);
  out << report.text();
  return report.passed() ? exit_ok : exit_hypothesis;
}

int command_compare(const fs::path& a, const fs::path& b, double p, double phi_scale,
                    std::ostream& out, std::ostream& err) {
  Trajectory ta;
  Trajectory tb;
  try {
    std::ifstream ia(a / "trajectory.csv");
    std::ifstream ib(b / "trajectory.csv");
    if (!ia || !ib) {
      err << "error: both directories must contain trajectory.csv\n";
      return exit_config;
    }
    ta = read_trajectory_csv(ia);
    tb = read_trajectory_csv(ib);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }
  if (ta.n_max() != tb.n_max()) {
    err << "error: incompatible grids: n_max " << ta.n_max() << " vs " << tb.n_max() << '\n';
    return exit_config;
  }
  if (ta.size() != tb.size()) {
    err << "error: incompatible grids: " << ta.size() << " vs " << tb.size() << " checkpoints\n";
    return exit_config;
  }
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (std::fabs(ta.time(i) - tb.time(i)) > 1e-12 * std::max(1.0, std::fabs(ta.time(i)))) {
      err << "error: incompatible grids: checkpoint " << i << " at t=" << format_double(ta.time(i))
          << " vs t=" << format_double(tb.time(i)) << '\n';
      return exit_config;
    }
  }
  const auto phi = BoundFunction::affine(phi_scale);
  out << "t,distance\n";
  for (std::size_t i = 0; i < ta.size(); ++i)
    out << format_double(ta.time(i)) << ',' << format_double(norm_p(ta.state(i) - tb.state(i), p, phi))
        << '\n';
  return exit_ok;
}

int main_cli(int argc, char** argv) {
  CLI::App app{"smolsens: coagulation sensitivity experiments"};
  app.require_subcommand(1);

  RunRequest req;
  std::string out_flag;
  std::uint64_t seed = 0;
  std::size_t checkpoints = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", req.config, "YAML run configuration")->required();
    sub->add_option("--out", out_flag, "output directory");
    sub->add_option("--seed", seed, "override stochastic.seed");
    sub->add_option("--checkpoints", checkpoints, "number of checkpoint intervals on [0, T]")
        ->check(CLI::PositiveNumber);
  };
  auto* run = app.add_subcommand("run", "run the scenario described by a config");
  add_common(run);
  auto* validate = app.add_subcommand("validate", "check a config and its kernel hypotheses");
  add_common(validate);

  fs::path dir_a;
  fs::path dir_b;
  double p = 1.0;
  double phi_scale = 1.0;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "per-checkpoint distances between two runs");
  compare->add_option("dirA", dir_a)->required();
  compare->add_option("dirB", dir_b)->required();
  compare->add_option("--norm", p, "weight exponent p of ||.||_p")->check(CLI::NonNegativeNumber);
  compare->add_option("--phi-scale", phi_scale, "phi(x) = scale (1 + x)")->check(CLI::PositiveNumber);
  compare->add_option("--out", compare_out, "also write compare.csv into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  auto fill = [&](CLI::App* sub) {
    if (sub->count("--out") > 0) req.out = out_flag;
    if (sub->count("--seed") > 0) req.seed = seed;
    if (sub->count("--checkpoints") > 0) req.checkpoints = checkpoints;
  };
  try {
    if (run->parsed()) {
      fill(run);
      return command_run(req, std::cout, std::cerr);
    }
    if (validate->parsed()) {
      fill(validate);
      return command_validate(req, std::cout, std::cerr);
    }
    if (compare_out.empty()) return command_compare(dir_a, dir_b, p, phi_scale, std::cout, std::cerr);
    std::ostringstream buf;
    const int code = command_compare(dir_a, dir_b, p, phi_scale, buf, std::cerr);
    std::cout << buf.str();
    if (code == exit_ok) {
      fs::create_directories(compare_out);
      std::ofstream(fs::path(compare_out) / "compare.csv", std::ios::binary) << buf.str();
    }
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_check_failed;
  }
}

}  // namespace smolsens::app
