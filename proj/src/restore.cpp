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
#include "owan/restore.hpp"

#include <fstream>
#include <ostream>

#include "owan/text_util.hpp"

namespace owan {

std::vector<std::size_t> tile_origins(std::size_t extent, std::size_t max_tile, std::size_t overlap) {
  if (max_tile == 0) throw ConfigError("tile size must be positive");
  if (overlap >= max_tile) throw ConfigError("tile overlap must be smaller than the tile size");
  if (extent <= max_tile) return {0};
  const std::size_t stride = max_tile - overlap;
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + max_tile < extent; o += stride) out.push_back(o);
  out.push_back(extent - max_tile);
  return out;
}

Image restore_image(const OWANParams<float>& params, const Image& input, const RestoreOptions& options,
                    std::vector<AttentionRecord>* records, const std::string& sample_id) {
  if (input.channels != params.config.in_channels) {
    throw ShapeError("image has " + std::to_string(input.channels) + " channels, model expects " +
                     std::to_string(params.config.in_channels));
  }
  const auto ys = tile_origins(input.height, options.max_tile, options.overlap);
  const auto xs = tile_origins(input.width, options.max_tile, options.overlap);
  const std::size_t th = std::min(input.height, options.max_tile), tw = std::min(input.width, options.max_tile);

  Image acc(input.height, input.width, input.channels, 0.0);
  std::vector<double> hits(input.height * input.width, 0.0);
  std::vector<double> weight_sum;
  std::size_t tiles = 0;
  Tape<float> tape(false);
  for (std::size_t y0 : ys) {
    for (std::size_t x0 : xs) {
      const Image tile = (th == input.height && tw == input.width) ? input : crop(input, y0, x0, th, tw);
      const auto result = network_forward(tape, params, images_to_tensor<float>({&tile}));
      const Image out = tensor_to_image(result.output, 0);
      for (std::size_t y = 0; y < th; ++y)
        for (std::size_t x = 0; x < tw; ++x) {
          hits[(y0 + y) * input.width + x0 + x] += 1.0;
          for (std::size_t c = 0; c < input.channels; ++c) acc.at(y0 + y, x0 + x, c) += out.at(y, x, c);
        }
      if (records) {
        const auto recs = attention_records(result, {sample_id});
        if (weight_sum.empty()) weight_sum.assign(recs.size(), 0.0);
        for (std::size_t i = 0; i < recs.size(); ++i) weight_sum[i] += recs[i].weight;
        if (tiles == 0) {
          for (const auto& r : recs) records->push_back(r);
        }
      }
      ++tiles;
    }
  }
  for (std::size_t p = 0; p < hits.size(); ++p)
    for (std::size_t c = 0; c < input.channels; ++c) acc.pixels[p * input.channels + c] /= hits[p];
  if (records && tiles > 1) {
    const std::size_t base = records->size() - weight_sum.size();
    for (std::size_t i = 0; i < weight_sum.size(); ++i) (*records)[base + i].weight = weight_sum[i] / tiles;
  }
  return clamp01(std::move(acc));
}

RestoreSummary restore_images(const OWANParams<float>& params, const std::filesystem::path& input_dir,
                              const std::filesystem::path& output_dir, std::ostream& log,
                              const RestoreOptions& options) {
  const auto files = list_png_files(input_dir);
  std::filesystem::create_directories(output_dir);
  RestoreSummary s;
  for (const auto& f : files) {
    Image im;
    try {
      im = read_png(f);
    } catch (const std::exception& e) {
      log << "warning: skipping " << f.filename().string() << ": " << e.what() << '\n';
      ++s.skipped;
      continue;
    }
    const Image out = restore_image(params, im, options, &s.records, f.stem().string());
    write_png(output_dir / f.filename(), out);
    ++s.written;
  }
  return s;
}

void write_attention_csv(const std::filesystem::path& path, const std::vector<AttentionRecord>& records,
                         const std::vector<OpDescriptor>& ops) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write attention CSV " + path.string());
  os << "sample_id,layer,op,op_name,weight\n";
  for (const auto& r : records) {
    const std::string name = r.op >= 1 && r.op <= ops.size() ? ops[r.op - 1].name() : "";
    os << r.sample_id << ',' << r.layer << ',' << r.op << ',' << name << ',' << format_real(r.weight) << '\n';
  }
  if (!os) throw std::runtime_error("failed writing attention CSV " + path.string());
}

std::vector<AttentionRecord> read_attention_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read attention CSV " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<AttentionRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw ConfigError("malformed attention row in " + path.string());
    out.push_back({f[0], parse_uint(f[1]), parse_uint(f[2]), parse_real(f[4])});
  }
  return out;
}

}  // namespace owan
