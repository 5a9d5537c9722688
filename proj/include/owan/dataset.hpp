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

#include "owan/distortion.hpp"

namespace owan::synth {

enum class Protocol { div2k, mixed, novel_train, novel_test, external };

std::string to_string(Protocol protocol);
Protocol parse_protocol(const std::string& text);

struct DatasetOptions {
  Protocol protocol = Protocol::mixed;
  std::size_t patches_per_image = 1;
  std::size_t patch_size = 64;
  std::uint64_t master_seed = 0;
  Severity severity = Severity::moderate;  // div2k only
};

struct ManifestRow {
  std::string sample_id;
  std::string source_image;
  std::size_t crop_x = 0;
  std::size_t crop_y = 0;
  std::size_t size = 0;
  PipelineSpec pipeline;
  std::uint64_t seed = 0;
};

/// Column order of manifest.csv.
const std::vector<std::string>& manifest_columns();

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Seed of sample `index` under `master_seed`.
std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index);

/// Rebuilds the distorted patch of a synthetic row from the clean patch.
Image replay_row(const Image& clean_patch, const ManifestRow& row);

/// Writes {out}/clean/{id}.png, {out}/distorted/{id}.png and
/// {out}/manifest.csv. Source images are taken in sorted filename order and
/// sample k of image i gets id i * patches_per_image + k, so ids and seeds
/// do not depend on which images fail to load. For the external protocol
/// `input_dir` must hold clean/ and distorted/ with matching filenames.
std::vector<ManifestRow> build_dataset(const std::filesystem::path& input_dir, const std::filesystem::path& output_dir,
                                       const DatasetOptions& options, std::ostream& log);

/// Clean/distorted pairs loaded from a dataset directory, in sorted order.
struct PairedDataset {
  std::vector<std::string> ids;
  std::vector<Image> clean;
  std::vector<Image> distorted;

  std::size_t size() const { return ids.size(); }
};

PairedDataset load_paired_dataset(const std::filesystem::path& dir);

}  // namespace owan::synth
