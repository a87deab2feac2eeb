#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "groupobs/config.hpp"

namespace groupobs {

enum class Subcommand { Run, Sweep, Gramian, CheckRank };

struct CliInvocation {
  Subcommand cmd = Subcommand::Run;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> decimate;
  int sweep_seeds = 8;
  bool quiet = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNumericalError = 2;

/// Executes a CLI invocation and returns the process exit code. Output files
/// are written to a temporary name and renamed on success, so failures leave
/// no partial files behind.
int run_invocation(const CliInvocation& inv);

std::string trajectory_csv(const TrajectoryLog& log);
std::string summary_json(const ScenarioConfig& config, const TrajectoryLog& log);

void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace groupobs
