// Copyright 2026 mixitkit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIXITKIT_TOOLS_COMMANDS_HPP_
#define MIXITKIT_TOOLS_COMMANDS_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "mixitkit/error.hpp"

namespace mixitkit {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitData = 3 };

int ExitCodeFor(ErrorKind kind);

// Full command line including the program name, e.g.
// {"mixitkit", "prepare", "--corpus", "dir", "--out", "m.jsonl"}.
// Human-readable results go to `out`, diagnostics to `err`.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mixitkit

#endif  // MIXITKIT_TOOLS_COMMANDS_HPP_
