#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "json.hpp"

namespace smolsens::app {

/// One scenario-internal check. `passed` decides the exit status; `gating`
/// false marks an informational statistic (e.g. a Monte Carlo coverage flag).
struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = true;
  bool gating = true;
};

struct ScenarioResult {
  std::vector<Check> checks;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> artifacts;

  bool passed() const;
  void add(Check c) { checks.push_back(std::move(c)); }
};

/// Runs the configured scenario and writes its CSV artifacts into `out`.
/// Library errors propagate to the caller, which maps them to exit codes.
ScenarioResult run_scenario(const RunConfig& cfg, const std::filesystem::path& out);

}  // namespace smolsens::app
