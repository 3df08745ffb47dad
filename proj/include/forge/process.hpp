#pragma once

#include <chrono>
#include <filesystem>
#include <string>

namespace forge::process {

struct Result {
  int exit_code = -1;  // -1 when killed or never started
  bool timed_out = false;
  std::string output;  // stdout and stderr, interleaved
  double duration_s = 0;
};

/// Runs `command` through /bin/sh -c in `workdir`. On timeout the whole
/// process group is killed and `timed_out` is set.
Result run_shell(const std::string& command, const std::filesystem::path& workdir, std::chrono::duration<double> timeout);

/// Single-quotes `arg` for /bin/sh.
std::string shell_quote(const std::string& arg);

}  // namespace forge::process
