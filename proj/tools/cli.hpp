#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace repdiv {

/// Entry point of the `repdiv` command. Returns the process exit code; errors
/// are reported on `err` as a one-line JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace repdiv
