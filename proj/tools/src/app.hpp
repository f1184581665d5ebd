#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace smolsens::app {

enum ExitCode : int {
  exit_ok = 0,
  exit_check_failed = 1,
  exit_config = 2,
  exit_hypothesis = 3,
  exit_blowup = 4,
};

struct RunRequest {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> checkpoints;
};

/// --out, then SMOLSENS_OUTDIR, then the config's `output`, then ./smolsens-out.
std::filesystem::path resolve_output_dir(const std::optional<std::filesystem::path>& flag,
                                         const std::string& config_output);

int command_run(const RunRequest& req, std::ostream& out, std::ostream& err);
int command_validate(const RunRequest& req, std::ostream& out, std::ostream& err);
/// Writes `t,distance` rows for ||mu^A_t - mu^B_t||_p to `out`.
int command_compare(const std::filesystem::path& a, const std::filesystem::path& b, double p,
                    double phi_scale, std::ostream& out, std::ostream& err);

int main_cli(int argc, char** argv);

}  // namespace smolsens::app
