#pragma once

// Command-line front end. Every subcommand writes one report to `out`
// (JSON, or CSV for scan and bg-profile) and diagnostics to `err`.
//
// Exit codes: 0 success, 1 violation or negative verdict (including a
// verdict refused because the MCP check failed), 2 usage or configuration
// error, 3 numerical failure or non-convergence.

#include <ostream>
#include <string>
#include <vector>

namespace conelab::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kSuccess = 0, kFinding = 1, kUsage = 2, kNumerical = 3 };

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conelab::cli
