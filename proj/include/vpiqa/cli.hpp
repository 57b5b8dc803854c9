// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vpiqa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point behind the `vpiqa` executable. `args` excludes the program
/// name. Commands:
///
///   train <config> [--resume] [--section.key value ...]
///   evaluate <config> <checkpoint> [--out DIR] [--json] [--section.key value ...]
///   export-prompt <checkpoint> <image> [--scale N]
///   inspect <checkpoint>
///   make-toy-dataset <dir> [--count N] [--seed N]
///
/// Returns 0 on success, 2 for configuration/usage errors, 3 otherwise.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vpiqa
