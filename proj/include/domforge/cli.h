#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace domforge::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,       // unknown subcommand, bad flags
  kExitValidation = 3,  // bad config values, missing inputs, out-of-range params
  kExitRuntime = 4,     // failures raised while processing the inputs
};

// Runs `domforge <args...>`. Outputs and `<subcommand>.report.json` go to
// --out; usage text goes to `out`, diagnostics and logs to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace domforge::cli
