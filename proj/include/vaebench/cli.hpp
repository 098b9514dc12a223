#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vaebench {

struct CommandSpec {
  std::string subcommand;  // gen-data | train | evil-twin | probe | report | selftest
  std::vector<std::string> config_paths;
  std::vector<std::string> overrides;  // key=value, applied after the config file
  std::string out_dir;
  bool force = false;
  std::size_t jobs = 1;
  std::string report_dir;   // probe, report
  std::string augmentation; // probe
  std::string compare_dir;  // report
};

/// Exit statuses: 0 success, 1 runtime failure, 2 configuration or precondition error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs one command. Failures print a single `error kind=... message="..."` line to `err`.
int run_command(const CommandSpec& spec, std::ostream& out, std::ostream& err);

/// Parses argv into a CommandSpec and runs it.
int run_cli(int argc, char** argv);

}  // namespace vaebench
