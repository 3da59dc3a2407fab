// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace modvid {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitValidation = 2,  // bad arguments, specs, manifests or data
    kExitIo = 3,
    kExitNumerical = 4,  // numerical or training failure
};

/// Entry point of the `modvid` tool. Messages go to `out` and `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace modvid
