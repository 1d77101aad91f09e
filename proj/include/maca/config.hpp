/*
 * Copyright 2026 The maca Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MACA_CONFIG_HPP_
#define MACA_CONFIG_HPP_

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "maca/error.hpp"

namespace maca {

/// Bad configuration or command line; maps to the usage exit code.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct KeyDef {
  std::string name;
  std::string fallback;  // default value; empty means "unset"
  std::string help;
};

/// Flat key = value configuration restricted to a fixed key set.
/// Precedence: defaults < config file < command-line flags.
class RunConfig {
 public:
  RunConfig(std::string command, std::vector<KeyDef> keys) : command_(std::move(command)), keys_(std::move(keys)) {
    for (const KeyDef& k : keys_) values_[k.name] = k.fallback;
  }

  const std::string& command() const { return command_; }
  const std::vector<KeyDef>& keys() const { return keys_; }

  bool known(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw UsageError("unknown config key '" + key + "' for " + command_);
    values_[key] = value;
  }

  /// Reads `key = value` lines; '#' starts a comment. A `command` key must
  /// match this subcommand.
  void load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key == "command") {
        if (value != command_) throw UsageError(path + ": config is for '" + value + "', not '" + command_ + "'");
        continue;
      }
      set(key, value);
    }
  }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("config key '" + key + "' is not defined for " + command_);
    return it->second;
  }

  bool has(const std::string& key) const { return !str(key).empty(); }

  double real(const std::string& key) const { return parse<double>(key, str(key)); }
  long long integer(const std::string& key) const { return parse<long long>(key, str(key)); }
  std::uint64_t u64(const std::string& key) const { return parse<std::uint64_t>(key, str(key)); }

  bool boolean(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "' expects a boolean, got '" + v + "'");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse<double>(key, trim(item)));
    if (out.empty()) throw UsageError("config key '" + key + "' expects a comma-separated list");
    return out;
  }

  /// Manifest text: command plus every key in declaration order.
  std::string manifest() const {
    std::ostringstream os;
    os << "command = " << command_ << '\n';
    for (const KeyDef& k : keys_) os << k.name << " = " << values_.at(k.name) << '\n';
    return os.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  template <class T>
  static T parse(const std::string& key, const std::string& text) {
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
      std::istringstream is(text);
      is >> v;
      if (is.fail() || !is.eof()) throw UsageError("config key '" + key + "' expects a number, got '" + text + "'");
    } else {
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw UsageError("config key '" + key + "' expects an integer, got '" + text + "'");
      }
    }
    return v;
  }

  std::string command_;
  std::vector<KeyDef> keys_;
  std::map<std::string, std::string> values_;
};

}  // namespace maca

#endif  // MACA_CONFIG_HPP_
