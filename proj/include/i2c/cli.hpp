// Copyright 2026 The i2c Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

// Command-line harness: configures, runs, and persists benchmark
// experiments as plot-ready CSV/JSON artifacts. Column layouts are
// documented in FORMATS.md at the repository root.

#ifndef I2C_CLI_HPP
#define I2C_CLI_HPP

#include <string>
#include <vector>

namespace i2c {

/// Dispatches one command ("solve", "mpc", "bench-timing", "demo-inverse",
/// "covariance-control") with its flags. Returns the process exit code:
/// 0 success, 1 numeric/solver failure, 2 configuration error. Diagnostics
/// go to stderr; progress lines to stdout.
int run_cli(const std::vector<std::string>& args);

}  // namespace i2c

#endif  // I2C_CLI_HPP
