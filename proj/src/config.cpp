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

#include "i2c/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "i2c/common.hpp"

namespace i2c {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& value) {
  size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("config value '" + key + " = " + value +
                      "' is not a number");
  }
  if (used != value.size())
    throw ConfigError("config value '" + key + " = " + value +
                      "' is not a number");
  return out;
}

std::uint64_t to_seed(const std::string& token, const std::string& spec) {
  const std::string t = trim(token);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("seed spec '" + spec + "' has a malformed entry '" +
                      token + "'");
  return std::stoull(t);
}

}  // namespace

bool ConfigMap::has(const std::string& key) const {
  return values_.count(key) != 0;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

const std::string& ConfigMap::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string ConfigMap::get(const std::string& key,
                           const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  const int out = static_cast<int>(v);
  if (static_cast<double>(out) != v)
    throw ConfigError("config value '" + key + " = " + raw(key) +
                      "' is not an integer");
  return out;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config value '" + key + " = " + v +
                    "' is not a boolean");
}

std::vector<std::string> ConfigMap::section_keys(
    const std::string& section) const {
  const std::string prefix = section + ".";
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (key.size() > prefix.size() && key.compare(0, prefix.size(), prefix) == 0)
      out.push_back(key.substr(prefix.size()));
  }
  return out;
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    cfg.set(section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

std::vector<std::uint64_t> parse_seed_spec(const std::string& spec) {
  const std::string s = trim(spec);
  if (s.empty()) throw ConfigError("seed spec is empty");

  std::vector<std::uint64_t> seeds;
  const size_t range = s.find("..");
  if (range != std::string::npos) {
    const std::uint64_t lo = to_seed(s.substr(0, range), spec);
    const std::uint64_t hi = to_seed(s.substr(range + 2), spec);
    if (hi < lo)
      throw ConfigError("seed range '" + spec + "' is decreasing");
    for (std::uint64_t v = lo; v <= hi; ++v) seeds.push_back(v);
    return seeds;
  }
  std::istringstream in(s);
  std::string token;
  while (std::getline(in, token, ',')) seeds.push_back(to_seed(token, spec));
  if (seeds.empty()) throw ConfigError("seed spec '" + spec + "' is empty");
  return seeds;
}

Propagator parse_propagator(const std::string& name) {
  if (name == "linearize") return Propagator::linearize();
  if (name == "cubature") return Propagator::cubature();
  const size_t colon = name.find(':');
  if (colon != std::string::npos) {
    const std::string kind = name.substr(0, colon);
    const std::string arg = name.substr(colon + 1);
    if (!arg.empty() &&
        arg.find_first_not_of("0123456789") == std::string::npos) {
      if (kind == "gh") return Propagator::gauss_hermite(std::stoi(arg));
      if (kind == "mc") return Propagator::monte_carlo(std::stoi(arg), 0);
    }
  }
  throw ConfigError("unknown inference backend '" + name +
                    "' (expected linearize, cubature, gh:<degree>, or "
                    "mc:<samples>)");
}

PolicyMode parse_mode(const std::string& name) {
  if (name == "ff") return PolicyMode::Feedforward;
  if (name == "fb") return PolicyMode::Feedback;
  if (name == "expert") return PolicyMode::Expert;
  throw ConfigError("unknown execution mode '" + name +
                    "' (expected ff, fb, or expert)");
}

VectorXd parse_vector(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> values;
  std::string token;
  while (in >> token) values.push_back(to_double("vector", token));
  if (values.empty())
    throw ConfigError("vector literal '" + text + "' is empty");
  VectorXd out(static_cast<int>(values.size()));
  for (size_t i = 0; i < values.size(); ++i) out(static_cast<int>(i)) = values[i];
  return out;
}

MatrixXd parse_square_matrix(const std::string& text) {
  const VectorXd flat = parse_vector(text);
  const int n = static_cast<int>(flat.size());
  const int d = static_cast<int>(std::round(std::sqrt(double(n))));
  if (d * d == n) {
    MatrixXd out(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) out(r, c) = flat(r * d + c);
    return out;
  }
  return MatrixXd(flat.asDiagonal());
}

}  // namespace i2c
