#pragma once

#include <ostream>
#include <string>

#include "wncs/config.hpp"

namespace wncs::cli {

enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kNotConverged = 2,
  kVerificationFailed = 3,
};

/// Each command writes its artifacts under config.out and returns an exit
/// code. Configuration problems surface as ConfigError.
int cmd_solve(const RunConfig& config, std::ostream& log);
/// `table_path` empty means <out>/value_table.csv.
int cmd_verify(const RunConfig& config, const std::string& table_path, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_sweep(const RunConfig& config, std::ostream& log);

/// Full command line: parses flags, resolves the config (defaults < file <
/// flags), dispatches and maps errors to exit codes.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace wncs::cli
