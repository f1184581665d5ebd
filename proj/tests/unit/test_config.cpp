#include <gtest/gtest.h>

#include <cstdlib>

#include "app.hpp"
#include "config.hpp"

using namespace smolsens;
using namespace smolsens::app;

namespace {

const char* kMinimal = R"(scenario: forward
kernel:
  family: constant
  lambda: 1.0
  param_box: [[0.5, 1.5]]
initial: monodisperse
grid:
  n_max: 32
horizon: 2.0
)";

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Config, MinimalDefaults) {
  const auto cfg = parse_config(kMinimal);
  EXPECT_EQ(cfg.scenario, Scenario::forward);
  EXPECT_EQ(cfg.n_max, 32u);
  EXPECT_EQ(cfg.horizon, 2.0);
  EXPECT_EQ(cfg.kernel.lambda, std::vector<double>{1.0});
  EXPECT_EQ(cfg.initial_measure(), GridMeasure::dirac(32, 1));
  EXPECT_EQ(cfg.stochastic.seed, 12345u);
}

TEST(Config, FullSchema) {
  const auto cfg = parse_config(R"(scenario: coupled-fd
kernel:
  family: affine-mix
  lambda: [1, 1, 1]
  param_box: [[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]]
  phi_scale: 2
initial: ["1:0.5", "2:0.25"]
grid: {n_max: 16}
horizon: 0.5
solver: {rel_tol: 1e-9, abs_tol: 1e-11, dt_checkpoint: 0.1, epsilon: 0.25, max_step: 0.01}
stochastic: {n: 5000, seed: 7, replicas: 8, h: 0.1, threads: 2}
analysis: {times: [0.1, 0.5], param_index: 2, tolerance: 1e-6, fd_h: 1e-4}
output: somewhere
)");
  EXPECT_EQ(cfg.scenario, Scenario::coupled_fd);
  EXPECT_EQ(cfg.kernel.spec.family, KernelFamily::affine_mix);
  EXPECT_EQ(cfg.kernel.phi_scale, 2.0);
  const auto mu0 = cfg.initial_measure();
  EXPECT_EQ(mu0[1], 0.5);
  EXPECT_EQ(mu0[2], 0.25);
  EXPECT_EQ(cfg.solver.epsilon, 0.25);
  EXPECT_EQ(cfg.stochastic.n, 5000);
  EXPECT_EQ(cfg.analysis.param_index, 2u);
  EXPECT_EQ(cfg.output, "somewhere");
}

TEST(Config, MapStyleInitialEntries) {
  std::string text = kMinimal;
  text.replace(text.find("initial: monodisperse"), 21, "initial:\n  - 1: 0.75\n  - 3: 0.25");
  const auto cfg = parse_config(text);
  EXPECT_EQ(cfg.initial_measure()[3], 0.25);
}

TEST(Config, UnknownKeyIsLineAnchored) {
  std::string text = kMinimal;
  text += "colour: blue\n";
  EXPECT_EQ(error_line(text), 10);
  std::string nested = kMinimal;
  nested.replace(nested.find("  n_max: 32"), 11, "  n_max: 32\n  mesh: 2");
  EXPECT_EQ(error_line(nested), 9);
}

TEST(Config, RejectsBadValues) {
  auto with = [](const std::string& from, const std::string& to) {
    std::string t = kMinimal;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  EXPECT_GT(error_line(with("forward", "backward")), 0);
  EXPECT_GT(error_line(with("lambda: 1.0", "lambda: 2.0")), 0);
  EXPECT_GT(error_line(with("lambda: 1.0", "lambda: [1, 2]")), 0);
  EXPECT_GT(error_line(with("[[0.5, 1.5]]", "[[1.5, 0.5]]")), 0);
  EXPECT_GT(error_line(with("n_max: 32", "n_max: 1")), 0);
  EXPECT_GT(error_line(with("horizon: 2.0", "horizon: soon")), 0);
  EXPECT_GT(error_line(with("monodisperse", "polydisperse")), 0);
  EXPECT_GT(error_line(with("family: constant", "family: brownian")), 0);
  EXPECT_NE(error_line("scenario: [unclosed\n"), -1);
}

TEST(Config, MissingRequiredKeys) {
  EXPECT_THROW(parse_config("scenario: forward\n"), ConfigError);
  std::string no_box = kMinimal;
  no_box.erase(no_box.find("  param_box"), std::string("  param_box: [[0.5, 1.5]]\n").size());
  EXPECT_THROW(parse_config(no_box), ConfigError);
}

TEST(Config, Overrides) {
  auto cfg = parse_config(kMinimal);
  const std::uint64_t seed = 99;
  const std::size_t cps = 8;
  apply_overrides(cfg, &seed, &cps);
  EXPECT_EQ(cfg.stochastic.seed, 99u);
  EXPECT_EQ(cfg.solver.dt_checkpoint, 0.25);
  const std::size_t zero = 0;
  EXPECT_THROW(apply_overrides(cfg, nullptr, &zero), ConfigError);
}

TEST(Config, ScenarioNames) {
  EXPECT_EQ(to_string(Scenario::coupled_fd), "coupled-fd");
  EXPECT_EQ(to_string(Scenario::validate_all), "validate-all");
}

TEST(OutputDir, Precedence) {
  ::unsetenv("SMOLSENS_OUTDIR");
  EXPECT_EQ(resolve_output_dir(std::nullopt, ""), "smolsens-out");
  EXPECT_EQ(resolve_output_dir(std::nullopt, "cfg"), "cfg");
  ::setenv("SMOLSENS_OUTDIR", "env", 1);
  EXPECT_EQ(resolve_output_dir(std::nullopt, "cfg"), "env");
  EXPECT_EQ(resolve_output_dir(std::filesystem::path("flag"), "cfg"), "flag");
  ::unsetenv("SMOLSENS_OUTDIR");
}
