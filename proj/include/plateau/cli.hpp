#pragma once

// Subcommand dispatcher behind the `plateau` binary. Kept in a library so the
// acceptance driver can run it in-process.

#include <ostream>
#include <string>
#include <vector>

namespace plateau::cli {

/// args excludes the program name. Writes the summary JSON to out and
/// diagnostics to err. Returns 0, 1 (domain error) or 2 (configuration error).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The subcommands, in help order.
const std::vector<std::string>& subcommands();

}  // namespace plateau::cli
