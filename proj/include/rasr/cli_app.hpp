#pragma once

#include <string>
#include <vector>

namespace rasr {

// Full command-line front end; `args` includes the program name. Returns the
// process exit code: 0 on success (and for --help / --print-config), 1 for
// usage errors, 2 for runtime failures.
int run_cli(std::vector<std::string> args);

}  // namespace rasr
