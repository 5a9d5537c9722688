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
#include "owan/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "owan/text_util.hpp"

namespace owan::analysis {

std::vector<AttentionRecord> collect_attention(const OWANParams<float>& params,
                                               const std::filesystem::path& dataset_dir,
                                               const RestoreOptions& options) {
  const auto dir = std::filesystem::is_directory(dataset_dir / "distorted") ? dataset_dir / "distorted" : dataset_dir;
  const auto files = list_png_files(dir);
  if (files.empty()) throw std::runtime_error("no images to analyze in " + dir.string());
  std::vector<AttentionRecord> records;
  for (const auto& f : files) restore_image(params, read_png(f), options, &records, f.stem().string());
  return records;
}

AttentionStats stats(const std::vector<AttentionRecord>& records, const std::string& tag) {
  if (records.empty()) throw DomainError("attention statistics need at least one record");
  AttentionStats s;
  s.tag = tag;
  std::set<std::string> samples;
  for (const auto& r : records) {
    if (r.layer == 0 || r.op == 0) throw DomainError("attention record indices are 1-based");
    s.layers = std::max(s.layers, r.layer);
    s.ops = std::max(s.ops, r.op);
    samples.insert(r.sample_id);
  }
  s.sample_count = samples.size();
  const std::size_t cells = s.layers * s.ops;
  std::vector<std::vector<double>> values(cells);
  for (const auto& r : records) values[(r.layer - 1) * s.ops + (r.op - 1)].push_back(r.weight);
  s.mean.assign(cells, 0.0);
  s.variance.assign(cells, 0.0);
  s.count.assign(cells, 0);
  for (std::size_t c = 0; c < cells; ++c) {
    auto& v = values[c];
    if (v.empty()) continue;
    // Sorting makes the sums independent of record order.
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    s.mean[c] = mean;
    s.variance[c] = sq / static_cast<double>(v.size());
    s.count[c] = v.size();
  }
  return s;
}

std::vector<DiffMap> diff_maps(const std::vector<AttentionStats>& per_tag) {
  if (per_tag.empty()) return {};
  const std::size_t layers = per_tag.front().layers, ops = per_tag.front().ops;
  for (const auto& s : per_tag) {
    if (s.layers != layers || s.ops != ops) throw ShapeError("attention statistics disagree on layers or ops");
  }
  const std::size_t cells = layers * ops;
  std::vector<double> pooled(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t total = 0;
    for (const auto& s : per_tag) total += s.count[c];
    if (total == 0) continue;
    for (const auto& s : per_tag) {
      pooled[c] += static_cast<double>(s.count[c]) / static_cast<double>(total) * s.mean[c];
    }
  }
  std::vector<DiffMap> out;
  for (const auto& s : per_tag) {
    DiffMap d{s.tag, layers, ops, std::vector<double>(cells)};
    for (std::size_t c = 0; c < cells; ++c) d.absdiff[c] = std::abs(s.mean[c] - pooled[c]);
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

template <typename Item>
std::vector<const Item*> sorted_by_tag(const std::vector<Item>& items) {
  std::vector<const Item*> out;
  for (const auto& i : items) out.push_back(&i);
  std::stable_sort(out.begin(), out.end(), [](const Item* a, const Item* b) { return a->tag < b->tag; });
  return out;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

}  // namespace

void export_stats_csv(const std::vector<AttentionStats>& stats, const std::filesystem::path& path) {
  auto os = open_csv(path);
  os << "tag,layer,op,mean,variance\n";
  for (const auto* s : sorted_by_tag(stats)) {
    for (std::size_t l = 0; l < s->layers; ++l)
      for (std::size_t o = 0; o < s->ops; ++o) {
        os << s->tag << ',' << l + 1 << ',' << o + 1 << ',' << format_real(s->mean_at(l, o)) << ','
           << format_real(s->variance_at(l, o)) << '\n';
      }
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void export_diff_csv(const std::vector<DiffMap>& diffs, const std::filesystem::path& path) {
  auto os = open_csv(path);
  os << "tag,layer,op,absdiff\n";
  for (const auto* d : sorted_by_tag(diffs)) {
    for (std::size_t l = 0; l < d->layers; ++l)
      for (std::size_t o = 0; o < d->ops; ++o) {
        os << d->tag << ',' << l + 1 << ',' << o + 1 << ',' << format_real(d->at(l, o)) << '\n';
      }
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace owan::analysis
