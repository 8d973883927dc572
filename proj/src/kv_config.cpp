/* Copyright (c) 2026 The uiunet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "uiu/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace uiu {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text, const std::string& source) {
  KvConfig cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    if (!cfg.values_.emplace(key, value).second) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key `" + key + "`");
    }
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KvConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(source_ + ": `" + key + "` expects a number, got `" + *v + "`");
  }
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError(source_ + ": `" + key + "` expects an integer, got `" + *v + "`");
  }
  return out;
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError(source_ + ": `" + key + "` expects an unsigned integer, got `" + *v + "`");
  }
  return out;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError(source_ + ": `" + key + "` expects true/false, got `" + *v + "`");
}

std::vector<double> KvConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  auto v = get(key);
  if (!v) return out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(source_ + ": `" + key + "` expects comma-separated numbers, got `" + *v + "`");
    }
  }
  return out;
}

void KvConfig::reject_unknown(const std::vector<std::string>& exact,
                              const std::vector<std::string>& prefixes) const {
  for (const auto& [key, value] : values_) {
    bool known = false;
    for (const auto& k : exact) known = known || key == k;
    for (const auto& p : prefixes) known = known || key.rfind(p, 0) == 0;
    if (known) continue;
    std::string valid;
    for (const auto& k : exact) valid += (valid.empty() ? "" : ", ") + k;
    for (const auto& p : prefixes) valid += (valid.empty() ? "" : ", ") + p + "<i>";
    throw ConfigError(source_ + ": unknown key `" + key + "`; valid keys: " + valid);
  }
}

}  // namespace uiu
