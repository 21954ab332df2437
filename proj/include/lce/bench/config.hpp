// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The lce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace lce::bench {

/// Flat `key = value` configuration with `[section]` headers and `#`
/// comments. Keys are addressed as "section.key"; keys before the first
/// header live in section "" and are addressed by the bare key.
///
///     [bench]
///     snr_db = 0, 10, 20   # lists are comma separated
///     methods = ls, psld_ce
class Config {
public:
    static Config parse(std::istream& in, const std::string& origin = "<config>");
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::vector<std::string> keys() const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

    /// Throws ConfigError naming the first key of `section` not in `allowed`
    /// (catches typos that would otherwise silently fall back to defaults).
    void check_section(const std::string& section, const std::set<std::string>& allowed) const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> where_;  // key -> "origin:line"

    const std::string* find(const std::string& key) const;
    [[noreturn]] void bad_value(const std::string& key, const std::string& expected) const;
};

/// Splits on commas and trims; empty items are dropped.
std::vector<std::string> split_list(const std::string& s);
std::string trim(const std::string& s);

}  // namespace lce::bench
