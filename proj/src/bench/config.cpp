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

#include "lce/bench/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lce/common/error.hpp"

namespace lce::bench {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(std::move(t));
    return out;
}

Config Config::parse(std::istream& in, const std::string& origin)
{
    Config cfg;
    std::string line, section;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::string at = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(at + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty() || section.find_first_of(" \t.=") != std::string::npos)
                throw ConfigError(at + ": bad section name '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(at + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty() || key.find_first_of(" \t.") != std::string::npos)
            throw ConfigError(at + ": bad key '" + key + "'");
        const std::string full = section.empty() ? key : section + "." + key;
        if (cfg.has(full))
            throw ConfigError(at + ": duplicate key '" + full + "' (first set at " + cfg.where_[full] + ")");
        cfg.values_[full] = trim(line.substr(eq + 1));
        cfg.where_[full] = at;
    }
    return cfg;
}

Config Config::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file '" + path + "'");
    return parse(in, path);
}

void Config::set(const std::string& key, const std::string& value)
{
    values_[key] = value;
    where_[key] = "<override>";
}

std::vector<std::string> Config::keys() const
{
    std::vector<std::string> out;
    for (const auto& kv : values_)
        out.push_back(kv.first);
    return out;
}

const std::string* Config::find(const std::string& key) const
{
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

void Config::bad_value(const std::string& key, const std::string& expected) const
{
    throw ConfigError(where_.at(key) + ": '" + key + "' = '" + values_.at(key) + "' is not " + expected);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    const auto* v = find(key);
    return v ? *v : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    long long out = 0;
    const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
    if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
        bad_value(key, "an integer");
    return out;
}

namespace {

bool parse_double(const std::string& s, double& out)
{
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "inf" || lower == "+inf") {
        out = std::numeric_limits<double>::infinity();
        return true;
    }
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size() && !std::isnan(out);
}

}  // namespace

double Config::get_double(const std::string& key, double fallback) const
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    double out = 0;
    if (!parse_double(*v, out))
        bad_value(key, "a number");
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on")
        return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off")
        return false;
    bad_value(key, "a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const
{
    const auto* v = find(key);
    return v ? split_list(*v) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const
{
    const auto* v = find(key);
    if (!v)
        return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) {
        double d = 0;
        if (!parse_double(item, d))
            bad_value(key, "a list of numbers");
        out.push_back(d);
    }
    return out;
}

void Config::check_section(const std::string& section, const std::set<std::string>& allowed) const
{
    const std::string prefix = section + ".";
    for (const auto& [key, value] : values_) {
        if (key.rfind(prefix, 0) != 0)
            continue;
        if (!allowed.count(key.substr(prefix.size())))
            throw ConfigError(where_.at(key) + ": unknown key '" + key + "'");
    }
}

}  // namespace lce::bench
