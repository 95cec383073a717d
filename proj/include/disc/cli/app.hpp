#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "disc/common/ini.hpp"

namespace disc::cli {

/// Process exit statuses.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
  kIo = 5,
};

/// One configuration key and the flag that overrides it. The same table
/// registers the flags, documents them in --help, validates configuration
/// files and fills in defaults.
struct OptionSpec {
  std::string section;
  std::string key;
  std::string flag; ///< long name without dashes
  std::string help;
  std::string fallback;
  bool is_switch = false; ///< a flag without a value, stored as true/false
  std::vector<std::string> commands;
};

const std::vector<OptionSpec> &option_table();
const std::vector<std::string> &command_names();

/// Default output root: $DISC_OUTPUT_ROOT, else "runs".
std::filesystem::path output_root();

/// Rejects unknown sections and keys, then adds every missing key with its
/// default, so the result fully describes a run.
IniDocument resolve_config(IniDocument doc, const std::string &command);

/// Runs one command line (without the program name) and returns the exit
/// status. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace disc::cli
