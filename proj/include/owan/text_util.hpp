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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace owan {

/// Shortest decimal form that parses back to the same double.
std::string format_real(double value);

/// Strict parsers: the whole field must be consumed; ConfigError otherwise.
double parse_real(std::string_view text);
std::uint64_t parse_uint(std::string_view text);
bool parse_bool(std::string_view text);

std::string_view trim(std::string_view text);

/// Splits on commas; no quoting support (fields never contain commas).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace owan
