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
#include <iosfwd>
#include <string>
#include <vector>

#include "owan/checkpoint.hpp"
#include "owan/image.hpp"
#include "owan/model.hpp"

namespace owan {

struct RestoreOptions {
  std::size_t max_tile = 256;  // images larger than this on either side are tiled
  std::size_t overlap = 32;    // rows/columns shared by neighbouring tiles
};

/// Tile origins along one axis of length `extent`: stride max_tile - overlap,
/// with the last tile flush against the far edge.
std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t max_tile, std::size_t overlap);

/// Runs the network on one image (evaluation pass). Overlapping tile outputs
/// are averaged. When `records` is given, the attention weights of every
/// tile are averaged per (layer, op) and appended under `sample_id`.
/// The returned image is clamped to [0, 1].
Image restore_image(const OWANParams<float>& params, const Image& input, const RestoreOptions& options = {},
                    std::vector<AttentionRecord>* records = nullptr, const std::string& sample_id = {});

struct RestoreSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::vector<AttentionRecord> records;
};

/// Restores every PNG of input_dir into output_dir under the same name.
/// Unreadable images are skipped with a warning on `log`. Records use the
/// file stem as sample id.
RestoreSummary restore_images(const OWANParams<float>& params, const std::filesystem::path& input_dir,
                              const std::filesystem::path& output_dir, std::ostream& log,
                              const RestoreOptions& options = {});

/// CSV: sample_id, layer, op, op_name, weight (layers and ops 1-based).
void write_attention_csv(const std::filesystem::path& path, const std::vector<AttentionRecord>& records,
                         const std::vector<OpDescriptor>& ops);
std::vector<AttentionRecord> read_attention_csv(const std::filesystem::path& path);

}  // namespace owan
