#pragma once

#include <string>

namespace loschmidt {

/// CLI-level options shared by the subcommands. Exit codes: 0 success,
/// 2 validation/config error, 3 numerical abort or selftest failure.
struct CliOptions {
  std::string config_path;
  int workers_override = -1;  // -1: not given on the command line
  std::string output_dir = ".";
  std::string format = "csv";  // "csv" | "json"
  bool verbose = false;
  bool flip_cayley = false;  // selftest negative-control hook
};

int cmd_run(const CliOptions& cli);
int cmd_compare(const CliOptions& cli);
int cmd_sweep(const CliOptions& cli);
int cmd_selftest(const CliOptions& cli);

}  // namespace loschmidt
