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
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "owan/model.hpp"

namespace owan {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses flat `key = value` text. Blank lines and lines starting with '#'
/// are ignored; a '#' after a value starts a comment. Duplicate keys and
/// lines without '=' raise ConfigError naming `origin` and the line.
std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& origin = "<config>");
std::vector<KeyValue> read_key_value_file(const std::filesystem::path& path);

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries);

/// Model keys: layers, group_size, channels, attention_hidden,
/// residual_blocks, in_channels, ops (comma list such as sep1,sep3,avg3),
/// attention_mode. Returns false for keys it does not own.
bool apply_model_key(OWANConfig& config, const std::string& key, const std::string& value);
std::vector<std::pair<std::string, std::string>> model_entries(const OWANConfig& config);

}  // namespace owan
