// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The kws Authors

#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace kws {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one `kws` invocation. `args` excludes the program name. Returns the
/// process exit code: 0 success, 2 validation or usage error, 3 numeric
/// fault.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace kws
