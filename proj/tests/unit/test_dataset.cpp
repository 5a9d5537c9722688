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
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "../support/oracles.hpp"
#include "owan/config_file.hpp"
#include "owan/dataset.hpp"
#include "owan/text_util.hpp"

using namespace owan;
using namespace owan::synth;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Byte contents of every file under dir, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

fs::path make_sources(const std::string& label, std::size_t count, std::size_t h = 40, std::size_t w = 52) {
  const fs::path dir = oracle::temp_dir(label);
  for (std::size_t i = 0; i < count; ++i) write_png(dir / ("src" + std::to_string(i) + ".png"), oracle::scene(h, w, i));
  return dir;
}

}  // namespace

TEST_CASE("text helpers") {
  for (double v : {0.0, 0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5}) CHECK(parse_real(format_real(v)) == v);
  CHECK(parse_uint(" 42 ") == 42);
  CHECK_THROWS_AS(parse_uint("4x"), ConfigError);
  CHECK_THROWS_AS(parse_uint("-1"), ConfigError);
  CHECK_THROWS_AS(parse_real(""), ConfigError);
  CHECK(parse_bool("true"));
  CHECK_FALSE(parse_bool("0"));
  CHECK_THROWS_AS(parse_bool("maybe"), ConfigError);
  CHECK(split_csv_line("a,,b") == std::vector<std::string>{"a", "", "b"});
  CHECK(trim("  x y \t") == "x y");
}

TEST_CASE("key = value parsing") {
  auto kv = parse_key_values("# comment\n\nlayers = 8\nops = sep1, avg3  # trailing\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0].key == "layers");
  CHECK(kv[0].value == "8");
  CHECK(kv[0].line == 3);
  CHECK(kv[1].value == "sep1, avg3");
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("just text\n"), ConfigError);

  OWANConfig c;
  CHECK(apply_model_key(c, "ops", "sep1, avg3"));
  CHECK(c.ops.size() == 2);
  CHECK(apply_model_key(c, "attention_mode", "fixed"));
  CHECK(c.attention_mode == AttentionMode::fixed);
  CHECK_FALSE(apply_model_key(c, "epochs", "3"));
  CHECK_THROWS_AS(apply_model_key(c, "layers", "many"), ConfigError);
  OWANConfig d;
  for (const auto& [k, v] : model_entries(c)) apply_model_key(d, k, v);
  CHECK(d == c);
}

TEST_CASE("PNG round trip and directory listing") {
  const fs::path dir = oracle::temp_dir("png");
  auto img = oracle::scene(9, 13, 1);
  write_png(dir / "b.png", img);
  auto back = read_png(dir / "b.png");
  CHECK(back.same_shape(img));
  CHECK(back.pixels == img.pixels);
  Image gray(5, 4, 1, 0.5);
  write_png(dir / "a.PNG", gray);
  auto g = read_png(dir / "a.PNG");
  CHECK(g.channels == 3);
  CHECK(g.pixels[0] == doctest::Approx(128.0 / 255.0));
  std::ofstream(dir / "c.txt") << "x";
  auto files = list_png_files(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.PNG");
  CHECK_THROWS_AS(read_png(dir / "c.txt"), ImageIoError);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), ImageIoError);
  CHECK(quantize_8bit(back).pixels == back.pixels);
  CHECK_THROWS_AS(crop(img, 5, 0, 5, 5), DomainError);
  auto f = flip_horizontal(img);
  CHECK(f.at(2, 0, 1) == img.at(2, 12, 1));
  fs::remove_all(dir);
}

TEST_CASE("image tensor packing") {
  auto a = oracle::scene(4, 5, 1), b = oracle::scene(4, 5, 2);
  auto t = images_to_tensor<double>({&a, &b});
  CHECK(t.shape() == Shape{2, 3, 4, 5});
  CHECK(t.values()[1 * 60 + 2 * 20 + 3 * 5 + 4] == a.at(3, 4, 2) * 0 + b.at(3, 4, 2));
  CHECK(tensor_to_image(t, 0).pixels == a.pixels);
  auto c = oracle::scene(5, 5, 1);
  CHECK_THROWS_AS(images_to_tensor<double>({&a, &c}), ShapeError);
}

TEST_CASE("build_dataset writes pairs and a replayable manifest") {
  const fs::path src = make_sources("ds_src", 2);
  const fs::path out = oracle::temp_dir("ds_out");
  DatasetOptions o;
  o.protocol = Protocol::mixed;
  o.patches_per_image = 4;
  o.patch_size = 24;
  o.master_seed = 11;
  std::ostringstream log;
  auto rows = build_dataset(src, out, o, log);
  REQUIRE(rows.size() == 8);
  auto read = read_manifest(out / "manifest.csv");
  REQUIRE(read.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(read[i].sample_id == rows[i].sample_id);
    CHECK(read[i].source_image == (i < 4 ? "src0.png" : "src1.png"));
    CHECK(read[i].seed == sample_seed(11, i));
    CHECK(read[i].size == 24);
    const auto clean = read_png(out / "clean" / (rows[i].sample_id + ".png"));
    const auto distorted = read_png(out / "distorted" / (rows[i].sample_id + ".png"));
    CHECK(clean.height == 24);
    auto src_img = oracle::scene(40, 52, i / 4);
    CHECK(clean.pixels == crop(src_img, read[i].crop_y, read[i].crop_x, 24, 24).pixels);
    // Replay from the manifest alone reproduces the stored distorted patch.
    CHECK(quantize_8bit(replay_row(clean, read[i])).pixels == distorted.pixels);
    CHECK(read[i].pipeline.stages.size() == rows[i].pipeline.stages.size());
  }
  const auto header = slurp(out / "manifest.csv").substr(0, slurp(out / "manifest.csv").find('\n'));
  CHECK(header == "sample_id,source_image,crop_x,crop_y,size,severity,blur_sigma,noise_sigma,jpeg_quality,"
                  "motion_max_len,external,seed");

  const fs::path again = oracle::temp_dir("ds_again");
  build_dataset(src, again, o, log);
  CHECK(tree(out) == tree(again));
  o.master_seed = 12;
  const fs::path other = oracle::temp_dir("ds_other");
  build_dataset(src, other, o, log);
  CHECK(tree(out) != tree(other));
  for (const auto& d : {src, out, again, other}) fs::remove_all(d);
}

TEST_CASE("build_dataset div2k protocol respects the severity class") {
  const fs::path src = make_sources("div_src", 1);
  const fs::path out = oracle::temp_dir("div_out");
  DatasetOptions o;
  o.protocol = Protocol::div2k;
  o.patches_per_image = 6;
  o.patch_size = 16;
  o.severity = Severity::severe;
  std::ostringstream log;
  build_dataset(src, out, o, log);
  const auto r = severity_ranges(Severity::severe);
  for (const auto& row : read_manifest(out / "manifest.csv")) {
    CHECK(row.pipeline.severity == Severity::severe);
    REQUIRE(row.pipeline.find(DistortionKind::jpeg));
    CHECK(row.pipeline.find(DistortionKind::jpeg)->value <= r.quality_hi);
    CHECK(row.pipeline.find(DistortionKind::gaussian_blur)->value >= r.blur_sigma.lo);
    CHECK(row.pipeline.find(DistortionKind::motion_blur) == nullptr);
  }
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST_CASE("build_dataset skips bad inputs and rejects empty ones") {
  const fs::path src = make_sources("skip_src", 2);
  std::ofstream(src / "broken.png") << "garbage";
  write_png(src / "tiny.png", oracle::scene(8, 8, 3));
  const fs::path out = oracle::temp_dir("skip_out");
  DatasetOptions o;
  o.patches_per_image = 2;
  o.patch_size = 16;
  std::ostringstream log;
  auto rows = build_dataset(src, out, o, log);
  CHECK(rows.size() == 4);
  CHECK(log.str().find("broken.png") != std::string::npos);
  CHECK(log.str().find("tiny.png") != std::string::npos);
  // Ids follow sorted source order: broken.png is index 0 and leaves a gap.
  CHECK(rows.front().sample_id == "000002");

  const fs::path empty = oracle::temp_dir("skip_empty");
  CHECK_THROWS(build_dataset(empty, out, o, log));
  for (const auto& d : {src, out, empty}) fs::remove_all(d);
}

TEST_CASE("external protocol crops matching regions of supplied pairs") {
  const fs::path src = oracle::temp_dir("ext_src");
  fs::create_directories(src / "clean");
  fs::create_directories(src / "distorted");
  for (int i = 0; i < 2; ++i) {
    write_png(src / "clean" / ("p" + std::to_string(i) + ".png"), oracle::scene(30, 30, i));
    write_png(src / "distorted" / ("p" + std::to_string(i) + ".png"), oracle::scene(30, 30, 50 + i));
  }
  const fs::path out = oracle::temp_dir("ext_out");
  DatasetOptions o;
  o.protocol = Protocol::external;
  o.patches_per_image = 3;
  o.patch_size = 12;
  std::ostringstream log;
  build_dataset(src, out, o, log);
  auto rows = read_manifest(out / "manifest.csv");
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(r.pipeline.find(DistortionKind::external) != nullptr);
    CHECK_THROWS_AS(replay_row(Image(12, 12, 3), r), DomainError);
    const int i = r.source_image == "p0.png" ? 0 : 1;
    CHECK(read_png(out / "distorted" / (r.sample_id + ".png")).pixels ==
          crop(oracle::scene(30, 30, 50 + i), r.crop_y, r.crop_x, 12, 12).pixels);
  }
  auto ds = load_paired_dataset(out);
  CHECK(ds.size() == 6);
  CHECK(ds.ids.front() == "000000");
  fs::remove(out / "distorted" / "000003.png");
  CHECK_THROWS(load_paired_dataset(out));
  fs::remove_all(src);
  fs::remove_all(out);
}

TEST_CASE("protocol names") {
  for (auto p : {Protocol::div2k, Protocol::mixed, Protocol::novel_train, Protocol::novel_test, Protocol::external}) {
    CHECK(parse_protocol(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_protocol("rain"), ConfigError);
}
