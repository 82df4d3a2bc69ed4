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

// Flat key = value run configuration with [section] headers, plus the value
// parsers shared by the command line: seed specs, quadrature backends, and
// execution modes. Every malformed input raises ConfigError with the
// offending text, so the CLI can map it to its configuration exit code.

#ifndef I2C_CONFIG_HPP
#define I2C_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "i2c/inference.hpp"
#include "i2c/solver.hpp"

namespace i2c {

/// Section-qualified key -> raw string value store. Keys are addressed as
/// "section.key" ("key" alone lands in the unnamed root section). Later
/// writes override earlier ones, which is how CLI flags shadow file values.
class ConfigMap {
 public:
  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  /// Raw value; throws ConfigError when the key is missing.
  const std::string& raw(const std::string& key) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// All keys of one section, stripped of the section prefix, in
  /// lexicographic order.
  std::vector<std::string> section_keys(const std::string& section) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Parses `key = value` lines with optional [section] headers, blank lines,
/// and '#' comments. Malformed lines are reported with their line number.
ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

/// Seed specs: a single value "7", a list "0,3,9", or a closed range
/// "0..99". Must be non-empty and non-negative.
std::vector<std::uint64_t> parse_seed_spec(const std::string& spec);

/// Inference backends: linearize | cubature | gh:<degree> | mc:<samples>.
Propagator parse_propagator(const std::string& name);

/// Execution modes: ff | fb | expert.
PolicyMode parse_mode(const std::string& name);

/// Vector literal: whitespace-separated numbers, e.g. "1.0 0 -2.5".
VectorXd parse_vector(const std::string& text);

/// Square-matrix literal: d*d numbers row-major, or d numbers for a
/// diagonal matrix.
MatrixXd parse_square_matrix(const std::string& text);

}  // namespace i2c

#endif  // I2C_CONFIG_HPP
