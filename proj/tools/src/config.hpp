#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "smolsens/forward.hpp"
#include "smolsens/kernels.hpp"
#include "smolsens/measures.hpp"

namespace smolsens::app {

enum class Scenario { forward, sensitivity, representation, truncation, mlsim, coupled_fd, validate_all };

std::string to_string(Scenario s);

/// Schema violation; line/column are 1-based (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, int column = 0);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct KernelConfig {
  KernelSpec spec;
  std::vector<double> lambda;
  double phi_scale = 1.0;
};

struct StochasticConfig {
  std::int64_t n = 10000;
  std::uint64_t seed = 12345;
  std::size_t replicas = 32;
  double h = 0.05;
  std::size_t threads = 0;
};

struct AnalysisConfig {
  std::vector<double> times;
  std::vector<double> truncation_levels{16, 64, 256, 1024, 4225};
  std::size_t param_index = 0;
  /// route-agreement threshold for representation / sensitivity checks
  double tolerance = 1e-5;
  /// finite-difference step of the deterministic oracle
  double fd_h = 1e-3;
};

struct RunConfig {
  Scenario scenario = Scenario::forward;
  KernelConfig kernel;
  /// (mass, weight) pairs; empty means monodisperse delta_1
  std::vector<std::pair<Mass, double>> initial;
  std::size_t n_max = 64;
  double horizon = 1.0;
  SolveOptions solver;
  StochasticConfig stochastic;
  AnalysisConfig analysis;
  std::string output;

  BoundFunction phi() const { return BoundFunction::affine(kernel.phi_scale); }
  GridMeasure initial_measure() const;
};

/// Parses and schema-checks a YAML run configuration. Unknown keys, wrong
/// types and out-of-range values raise ConfigError with the offending line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies the command-line overrides (seed, checkpoint count).
void apply_overrides(RunConfig& cfg, const std::uint64_t* seed, const std::size_t* checkpoints);

}  // namespace smolsens::app
