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
#include <vector>

#include "owan/model.hpp"
#include "owan/restore.hpp"

namespace owan::analysis {

/// Per-(layer, op) statistics of attention weights for one tag. Matrices
/// are layers x ops, row-major; `count` holds the records behind each cell.
struct AttentionStats {
  std::string tag;
  std::size_t layers = 0;
  std::size_t ops = 0;
  std::size_t sample_count = 0;
  std::vector<double> mean;
  std::vector<double> variance;  // population variance
  std::vector<std::size_t> count;

  double mean_at(std::size_t layer, std::size_t op) const { return mean[layer * ops + op]; }
  double variance_at(std::size_t layer, std::size_t op) const { return variance[layer * ops + op]; }
};

struct DiffMap {
  std::string tag;
  std::size_t layers = 0;
  std::size_t ops = 0;
  std::vector<double> absdiff;

  double at(std::size_t layer, std::size_t op) const { return absdiff[layer * ops + op]; }
};

/// Evaluation passes over every image of `dataset_dir` (its distorted/
/// subdirectory when present); one record per (image, layer, op).
std::vector<AttentionRecord> collect_attention(const OWANParams<float>& params,
                                               const std::filesystem::path& dataset_dir,
                                               const RestoreOptions& options = {});

/// Grid size is taken from the largest layer and op indices present.
/// Results do not depend on record order.
AttentionStats stats(const std::vector<AttentionRecord>& records, const std::string& tag = {});

/// |mean_tag - mean_all| per cell, where mean_all pools every record of
/// every tag (each tag weighted by its record count).
std::vector<DiffMap> diff_maps(const std::vector<AttentionStats>& per_tag);

/// Columns tag, layer, op, mean, variance; rows sorted by (tag, layer, op).
void export_stats_csv(const std::vector<AttentionStats>& stats, const std::filesystem::path& path);

/// Columns tag, layer, op, absdiff; rows sorted by (tag, layer, op).
void export_diff_csv(const std::vector<DiffMap>& diffs, const std::filesystem::path& path);

}  // namespace owan::analysis
