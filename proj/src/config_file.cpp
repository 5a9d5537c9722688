/*
 * Copyright (c) 2026 The OWAN Lab Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "owan/config_file.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "owan/text_util.hpp"

namespace owan {

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& origin) {
  std::vector<KeyValue> out;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    out.push_back({std::move(key), std::move(value), lineno});
  }
  return out;
}

std::vector<KeyValue> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

namespace {

std::vector<OpDescriptor> parse_ops(const std::string& value) {
  std::vector<OpDescriptor> ops;
  for (const auto& tok : split_csv_line(value)) ops.push_back(OpDescriptor::parse(std::string(trim(tok))));
  return ops;
}

std::string format_ops(const std::vector<OpDescriptor>& ops) {
  std::string out;
  for (std::size_t i = 0; i < ops.size(); ++i) out += (i ? "," : "") + ops[i].name();
  return out;
}

}  // namespace

bool apply_model_key(OWANConfig& config, const std::string& key, const std::string& value) {
  if (key == "layers") config.layers = parse_uint(value);
  else if (key == "group_size") config.group_size = parse_uint(value);
  else if (key == "channels") config.channels = parse_uint(value);
  else if (key == "attention_hidden") config.attention_hidden = parse_uint(value);
  else if (key == "residual_blocks") config.residual_blocks = parse_uint(value);
  else if (key == "in_channels") config.in_channels = parse_uint(value);
  else if (key == "ops") config.ops = parse_ops(value);
  else if (key == "attention_mode") config.attention_mode = parse_attention_mode(value);
  else return false;
  return true;
}

std::vector<std::pair<std::string, std::string>> model_entries(const OWANConfig& config) {
  return {
      {"layers", std::to_string(config.layers)},
      {"group_size", std::to_string(config.group_size)},
      {"channels", std::to_string(config.channels)},
      {"attention_hidden", std::to_string(config.attention_hidden)},
      {"residual_blocks", std::to_string(config.residual_blocks)},
      {"in_channels", std::to_string(config.in_channels)},
      {"ops", format_ops(config.ops)},
      {"attention_mode", to_string(config.attention_mode)},
  };
}

}  // namespace owan
