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
#include "owan/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "owan/text_util.hpp"

namespace owan::synth {

std::string to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::div2k: return "div2k";
    case Protocol::mixed: return "mixed";
    case Protocol::novel_train: return "novel-train";
    case Protocol::novel_test: return "novel-test";
    case Protocol::external: return "external";
  }
  return "unknown";
}

Protocol parse_protocol(const std::string& text) {
  if (text == "div2k") return Protocol::div2k;
  if (text == "mixed") return Protocol::mixed;
  if (text == "novel-train") return Protocol::novel_train;
  if (text == "novel-test") return Protocol::novel_test;
  if (text == "external") return Protocol::external;
  throw ConfigError("unknown protocol '" + text + "' (expected div2k, mixed, novel-train, novel-test or external)");
}

const std::vector<std::string>& manifest_columns() {
  static const std::vector<std::string> cols = {"sample_id",      "source_image", "crop_x",     "crop_y",
                                                "size",           "severity",     "blur_sigma", "noise_sigma",
                                                "jpeg_quality",   "motion_max_len", "external", "seed"};
  return cols;
}

namespace {

// Manifest columns holding one stage parameter each, in canonical stage order.
struct StageColumn {
  DistortionKind kind;
  std::size_t column;
};

constexpr StageColumn kStageColumns[] = {
    {DistortionKind::gaussian_blur, 6},
    {DistortionKind::motion_blur, 9},
    {DistortionKind::gaussian_noise, 7},
    {DistortionKind::jpeg, 8},
};

bool is_synthetic(const ManifestRow& row) { return row.pipeline.find(DistortionKind::external) == nullptr; }

}  // namespace

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write manifest " + path.string());
  const auto& cols = manifest_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    std::vector<std::string> f(cols.size());
    f[0] = r.sample_id;
    f[1] = r.source_image;
    f[2] = std::to_string(r.crop_x);
    f[3] = std::to_string(r.crop_y);
    f[4] = std::to_string(r.size);
    f[5] = to_string(r.pipeline.severity);
    for (const auto& sc : kStageColumns) {
      if (const auto* s = r.pipeline.find(sc.kind)) f[sc.column] = format_real(s->value);
    }
    f[10] = r.pipeline.find(DistortionKind::external) ? "1" : "0";
    f[11] = std::to_string(r.seed);
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing manifest " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty manifest " + path.string());
  if (split_csv_line(line) != manifest_columns()) throw ConfigError("unexpected manifest header in " + path.string());
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != manifest_columns().size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
    }
    ManifestRow r;
    r.sample_id = f[0];
    r.source_image = f[1];
    r.crop_x = parse_uint(f[2]);
    r.crop_y = parse_uint(f[3]);
    r.size = parse_uint(f[4]);
    r.pipeline.severity = parse_severity(f[5]);
    r.seed = parse_uint(f[11]);
    if (f[10] == "1") r.pipeline.stages.push_back({DistortionKind::external, 0.0, 0});
    for (const auto& sc : kStageColumns) {
      if (!f[sc.column].empty()) {
        r.pipeline.stages.push_back({sc.kind, parse_real(f[sc.column]), stage_seed(r.seed, sc.kind)});
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index) { return split_seed(master_seed, index); }

Image replay_row(const Image& clean_patch, const ManifestRow& row) {
  if (!is_synthetic(row)) throw DomainError("external samples cannot be replayed from the manifest");
  return apply_pipeline(clean_patch, row.pipeline);
}

namespace {

std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

PipelineSpec sample_pipeline(const DatasetOptions& o, std::uint64_t seed) {
  switch (o.protocol) {
    case Protocol::div2k: return sample_div2k_pipeline(o.severity, seed);
    case Protocol::mixed: return sample_mixed_pipeline(MixedRanges::standard(), seed);
    case Protocol::novel_train: return sample_mixed_pipeline(MixedRanges::novel_train(), seed);
    case Protocol::novel_test: return sample_mixed_pipeline(MixedRanges::novel_test(), seed);
    case Protocol::external: break;
  }
  PipelineSpec p;
  p.stages.push_back({DistortionKind::external, 0.0, 0});
  return p;
}

}  // namespace

std::vector<ManifestRow> build_dataset(const std::filesystem::path& input_dir, const std::filesystem::path& output_dir,
                                       const DatasetOptions& options, std::ostream& log) {
  if (options.patch_size == 0) throw ConfigError("patch size must be positive");
  if (options.patches_per_image == 0) throw ConfigError("patch count must be positive");
  const bool external = options.protocol == Protocol::external;
  const auto clean_dir = external ? input_dir / "clean" : input_dir;
  const auto files = list_png_files(clean_dir);
  if (files.empty()) throw std::runtime_error("no PNG images found in " + clean_dir.string());

  std::filesystem::create_directories(output_dir / "clean");
  std::filesystem::create_directories(output_dir / "distorted");

  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string name = files[i].filename().string();
    if (name.find_first_of(",\"\n\r") != std::string::npos) {
      log << "warning: skipping " << name << ": file name not representable in the manifest\n";
      continue;
    }
    Image src, src_distorted;
    try {
      src = read_png(files[i]);
      if (external) {
        src_distorted = read_png(input_dir / "distorted" / name);
        if (!src_distorted.same_shape(src)) throw ImageIoError("clean/distorted size mismatch");
      }
      if (src.height < options.patch_size || src.width < options.patch_size) {
        throw DomainError("smaller than the patch size");
      }
    } catch (const std::exception& e) {
      log << "warning: skipping " << name << ": " << e.what() << '\n';
      continue;
    }
    for (std::size_t k = 0; k < options.patches_per_image; ++k) {
      const std::size_t index = i * options.patches_per_image + k;
      ManifestRow row;
      row.sample_id = sample_name(index);
      row.source_image = name;
      row.size = options.patch_size;
      row.seed = sample_seed(options.master_seed, index);
      Rng crop_rng(split_seed(row.seed, 0));
      const CropOrigin o = crop_patches(src, options.patch_size, 1, crop_rng).front();
      row.crop_x = o.x;
      row.crop_y = o.y;
      row.pipeline = sample_pipeline(options, row.seed);
      const Image clean = crop(src, o.y, o.x, options.patch_size, options.patch_size);
      const Image distorted = external ? crop(src_distorted, o.y, o.x, options.patch_size, options.patch_size)
                                       : apply_pipeline(clean, row.pipeline);
      write_png(output_dir / "clean" / (row.sample_id + ".png"), clean);
      write_png(output_dir / "distorted" / (row.sample_id + ".png"), distorted);
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw std::runtime_error("no usable images in " + clean_dir.string());
  write_manifest(output_dir / "manifest.csv", rows);
  return rows;
}

PairedDataset load_paired_dataset(const std::filesystem::path& dir) {
  const auto clean_files = list_png_files(dir / "clean");
  PairedDataset ds;
  for (const auto& f : clean_files) {
    const auto name = f.filename();
    const auto distorted_path = dir / "distorted" / name;
    if (!std::filesystem::exists(distorted_path)) {
      throw std::runtime_error("missing distorted counterpart for " + f.string());
    }
    ds.ids.push_back(name.stem().string());
    ds.clean.push_back(read_png(f));
    ds.distorted.push_back(read_png(distorted_path));
    if (!ds.clean.back().same_shape(ds.distorted.back())) {
      throw ShapeError("clean/distorted shape mismatch for " + name.string());
    }
  }
  if (ds.ids.empty()) throw std::runtime_error("no image pairs found under " + dir.string());
  return ds;
}

}  // namespace owan::synth
