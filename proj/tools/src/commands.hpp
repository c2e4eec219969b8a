// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace medrg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv and runs the selected subcommand (gen-data, train, eval,
/// predict, overlay). Returns the process exit code.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

/// Convenience overload; args excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace medrg::cli
