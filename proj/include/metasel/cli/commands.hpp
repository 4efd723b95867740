#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "metasel/util/config.hpp"

namespace metasel::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,    // any other library error
  kExitConfig = 2,     // bad flags, config values, strategies or task names
  kExitInvariant = 3,  // a checked invariant failed (rate partition, manifest, non-finite loss)
  kExitIo = 4,         // missing or unreadable files, unwritable output
};

// Maps the exception currently being handled onto an exit code.
int exit_code_for_current_exception();

// Full command line: metasel <gen-data|pretrain|eval|oracle> [flags]. Flags
// override values from --config; the effective configuration is written to
// <out>/<command>.config before the command runs.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Subcommands on an already merged configuration. Each returns an exit code
// and throws metasel errors for the caller to map.
int cmd_gen_data(const KeyValueConfig& kv, std::ostream& log);
int cmd_pretrain(const KeyValueConfig& kv, std::ostream& log);
int cmd_eval(const KeyValueConfig& kv, std::ostream& log);
int cmd_oracle(const KeyValueConfig& kv, std::ostream& log);

// Fixed output layout under --out.
std::filesystem::path datasets_dir(const KeyValueConfig& kv);
std::filesystem::path checkpoints_dir(const KeyValueConfig& kv);
std::filesystem::path reports_dir(const KeyValueConfig& kv);

}  // namespace metasel::cli
