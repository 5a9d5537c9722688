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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "../support/oracles.hpp"
#include "owan/analysis.hpp"
#include "owan/restore.hpp"

using namespace owan;
namespace fs = std::filesystem;

namespace {

OWANConfig small_model(AttentionMode mode = AttentionMode::learned) {
  OWANConfig c;
  c.layers = 4;
  c.group_size = 2;
  c.channels = 4;
  c.attention_hidden = 4;
  c.residual_blocks = 1;
  c.attention_mode = mode;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Forward pass on one crop, as an image (unclamped).
Image forward_crop(const OWANParams<float>& p, const Image& img, std::size_t y, std::size_t x, std::size_t h,
                   std::size_t w, std::vector<double>* attention) {
  const Image c = crop(img, y, x, h, w);
  Tape<float> tape(false);
  auto res = network_forward(tape, p, images_to_tensor<float>({&c}));
  if (attention) {
    for (const auto& a : res.attention)
      for (float v : a.values()) attention->push_back(v);
  }
  return tensor_to_image(res.output, 0);
}

std::vector<AttentionRecord> random_records(std::size_t samples, std::size_t layers, std::size_t ops,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<AttentionRecord> out;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t l = 1; l <= layers; ++l) {
      std::vector<double> w(ops);
      double z = 0;
      for (auto& v : w) z += v = u(rng);
      for (std::size_t o = 1; o <= ops; ++o) out.push_back({"s" + std::to_string(s), l, o, w[o - 1] / z});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("tile origins") {
  CHECK(tile_origins(63, 256, 32) == std::vector<std::size_t>{0});
  CHECK(tile_origins(256, 256, 32) == std::vector<std::size_t>{0});
  CHECK(tile_origins(300, 256, 32) == std::vector<std::size_t>{0, 44});
  CHECK(tile_origins(40, 16, 4) == std::vector<std::size_t>{0, 12, 24});
  CHECK_THROWS(tile_origins(40, 16, 16));
}

TEST_CASE("single-tile restoration equals the clamped forward pass") {
  auto p = build_network<float>(small_model(), 2);
  auto img = oracle::scene(63, 63, 1);
  std::vector<AttentionRecord> recs;
  auto out = restore_image(p, img, {}, &recs, "x");
  CHECK(out.same_shape(img));
  std::vector<double> att;
  auto ref = clamp01(forward_crop(p, img, 0, 0, 63, 63, &att));
  CHECK(out.pixels == ref.pixels);
  REQUIRE(recs.size() == 4 * 8);
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].weight == doctest::Approx(att[i]).epsilon(1e-7));
}

TEST_CASE("tiled restoration averages overlapping tiles") {
  auto p = build_network<float>(small_model(), 3);
  auto img = oracle::scene(30, 40, 2);
  RestoreOptions o{16, 4};
  std::vector<AttentionRecord> recs;
  auto out = restore_image(p, img, o, &recs, "t");
  Image sum(30, 40, 3), cnt(30, 40, 1);
  std::vector<double> att_sum(32, 0.0);
  std::size_t tiles = 0;
  for (std::size_t y : tile_origins(30, 16, 4)) {
    for (std::size_t x : tile_origins(40, 16, 4)) {
      std::vector<double> att;
      auto t = forward_crop(p, img, y, x, 16, 16, &att);
      for (std::size_t i = 0; i < 32; ++i) att_sum[i] += att[i];
      ++tiles;
      for (std::size_t yy = 0; yy < 16; ++yy)
        for (std::size_t xx = 0; xx < 16; ++xx) {
          cnt.at(y + yy, x + xx, 0) += 1;
          for (std::size_t c = 0; c < 3; ++c) sum.at(y + yy, x + xx, c) += t.at(yy, xx, c);
        }
    }
  }
  double worst = 0;
  for (std::size_t yy = 0; yy < 30; ++yy)
    for (std::size_t xx = 0; xx < 40; ++xx)
      for (std::size_t c = 0; c < 3; ++c) {
        const double ref = std::clamp(sum.at(yy, xx, c) / cnt.at(yy, xx, 0), 0.0, 1.0);
        worst = std::max(worst, std::abs(out.at(yy, xx, c) - ref));
      }
  CHECK(worst <= 1e-6);
  REQUIRE(recs.size() == 32);
  for (std::size_t i = 0; i < 32; ++i) CHECK(recs[i].weight == doctest::Approx(att_sum[i] / tiles).epsilon(1e-6));
}

TEST_CASE("restore_images writes outputs deterministically and skips bad files") {
  const fs::path in = oracle::temp_dir("rin"), out1 = oracle::temp_dir("rout1"), out2 = oracle::temp_dir("rout2");
  for (int i = 0; i < 3; ++i) write_png(in / ("im" + std::to_string(i) + ".png"), oracle::scene(20, 24, i));
  std::ofstream(in / "bad.png") << "nope";
  // Near-identity network: none mode, zero merges, output head untrained.
  auto p = build_network<float>(small_model(AttentionMode::none), 1);
  for (auto& l : p.layers) {
    for (auto& v : l.merge.weight.values()) v = 0.0f;
  }
  std::ostringstream log;
  auto s1 = restore_images(p, in, out1, log);
  auto s2 = restore_images(p, in, out2, log);
  CHECK(s1.written == 3);
  CHECK(s1.skipped == 1);
  CHECK(s1.records.empty());
  CHECK(log.str().find("bad.png") != std::string::npos);
  for (int i = 0; i < 3; ++i) {
    const std::string name = "im" + std::to_string(i) + ".png";
    CHECK(slurp(out1 / name) == slurp(out2 / name));
    CHECK(read_png(out1 / name).same_shape(oracle::scene(20, 24, i)));
  }
  auto learned = build_network<float>(small_model(), 1);
  auto s3 = restore_images(learned, in, out1, log);
  CHECK(s3.records.size() == 3 * 4 * 8);
  CHECK(s3.records.front().sample_id == "im0");
  write_attention_csv(out1 / "att.csv", s3.records, learned.config.ops);
  auto back = read_attention_csv(out1 / "att.csv");
  REQUIRE(back.size() == s3.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].sample_id == s3.records[i].sample_id);
    CHECK(back[i].layer == s3.records[i].layer);
    CHECK(back[i].weight == s3.records[i].weight);
  }
  CHECK(slurp(out1 / "att.csv").rfind("sample_id,layer,op,op_name,weight\n", 0) == 0);
  for (const auto& d : {in, out1, out2}) fs::remove_all(d);
}

TEST_CASE("collect_attention counts and normalization") {
  const fs::path dir = oracle::temp_dir("collect");
  fs::create_directories(dir / "distorted");
  for (int i = 0; i < 10; ++i) write_png(dir / "distorted" / ("d" + std::to_string(i) + ".png"), oracle::scene(16, 16, i));
  OWANConfig c;  // default: 40 layers x 8 ops
  auto p = build_network<float>(c, 5);
  auto recs = analysis::collect_attention(p, dir);
  REQUIRE(recs.size() == 3200);
  for (std::size_t k = 0; k < recs.size(); k += 8) {
    double s = 0;
    for (std::size_t o = 0; o < 8; ++o) s += recs[k + o].weight;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  auto again = analysis::collect_attention(p, dir);
  for (std::size_t i = 0; i < recs.size(); ++i) CHECK(again[i].weight == recs[i].weight);
  auto st = analysis::stats(recs, "noise");
  CHECK(st.sample_count == 10);
  for (std::size_t l = 0; l < 40; ++l) {
    double s = 0;
    for (std::size_t o = 0; o < 8; ++o) {
      s += st.mean_at(l, o);
      CHECK(st.variance_at(l, o) >= 0.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  const fs::path empty = oracle::temp_dir("collect_empty");
  CHECK_THROWS(analysis::collect_attention(p, empty));
  fs::remove_all(dir);
  fs::remove_all(empty);
}

TEST_CASE("stats match the two-pass oracle and ignore record order") {
  auto recs = random_records(37, 5, 8, 1);
  auto st = analysis::stats(recs, "t");
  CHECK(st.layers == 5);
  CHECK(st.ops == 8);
  CHECK(st.sample_count == 37);
  for (std::size_t l = 1; l <= 5; ++l) {
    for (std::size_t o = 1; o <= 8; ++o) {
      std::vector<double> cell;
      for (const auto& r : recs)
        if (r.layer == l && r.op == o) cell.push_back(r.weight);
      CHECK(std::abs(st.mean_at(l - 1, o - 1) - oracle::mean(cell)) <= 1e-12);
      CHECK(std::abs(st.variance_at(l - 1, o - 1) - oracle::population_variance(cell)) <= 1e-12);
    }
  }
  auto shuffled = recs;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(4));
  auto st2 = analysis::stats(shuffled, "t");
  CHECK(st2.mean == st.mean);
  CHECK(st2.variance == st.variance);

  auto one = analysis::stats(random_records(1, 3, 4, 2));
  for (double v : one.variance) CHECK(v == 0.0);
  auto twin = random_records(1, 3, 4, 3);
  auto copy = twin;
  for (auto& r : copy) r.sample_id = "other";
  twin.insert(twin.end(), copy.begin(), copy.end());
  auto tw = analysis::stats(twin);
  CHECK(tw.sample_count == 2);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(tw.mean[i] == doctest::Approx(copy[i].weight).epsilon(1e-15));
    CHECK(tw.variance[i] == doctest::Approx(0.0).scale(1e-18));
  }
  CHECK_THROWS_AS(analysis::stats({}), DomainError);
}

TEST_CASE("difference maps") {
  // Hand-built: 1 layer, 2 ops. Tag a has 1 sample (0.2, 0.8); tag b has
  // 3 samples with mean (0.6, 0.4). Pooled mean = (0.2 + 3 * 0.6) / 4 = 0.5.
  std::vector<AttentionRecord> a = {{"a0", 1, 1, 0.2}, {"a0", 1, 2, 0.8}};
  std::vector<AttentionRecord> b = {{"b0", 1, 1, 0.5}, {"b0", 1, 2, 0.5}, {"b1", 1, 1, 0.6},
                                    {"b1", 1, 2, 0.4}, {"b2", 1, 1, 0.7}, {"b2", 1, 2, 0.3}};
  auto sa = analysis::stats(a, "a"), sb = analysis::stats(b, "b");
  auto d = analysis::diff_maps({sa, sb});
  REQUIRE(d.size() == 2);
  CHECK(d[0].tag == "a");
  CHECK(d[0].at(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(d[0].at(0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(d[1].at(0, 0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(d[1].at(0, 1) == doctest::Approx(0.1).epsilon(1e-12));

  // Pooled mean equals the count-weighted average of tag means.
  auto ra = random_records(7, 3, 8, 10), rb = random_records(13, 3, 8, 11);
  auto all = ra;
  all.insert(all.end(), rb.begin(), rb.end());
  auto pa = analysis::stats(ra, "a"), pb = analysis::stats(rb, "b"), pall = analysis::stats(all, "all");
  auto dm = analysis::diff_maps({pa, pb});
  for (std::size_t i = 0; i < 24; ++i) {
    CHECK(dm[0].absdiff[i] >= 0.0);
    CHECK(std::abs(dm[0].absdiff[i] - std::abs(pa.mean[i] - pall.mean[i])) <= 1e-12);
    CHECK(std::abs((7 * pa.mean[i] + 13 * pb.mean[i]) / 20 - pall.mean[i]) <= 1e-12);
  }
  auto same = analysis::diff_maps({pa, analysis::stats(ra, "copy")});
  for (const auto& m : same)
    for (double v : m.absdiff) CHECK(v == doctest::Approx(0.0).scale(1e-15));
  const auto alone = analysis::diff_maps({pa});
  for (double v : alone[0].absdiff) CHECK(v == 0.0);
  CHECK_THROWS(analysis::diff_maps({pa, analysis::stats(random_records(2, 4, 8, 1), "x")}));
}

TEST_CASE("CSV exports") {
  const fs::path dir = oracle::temp_dir("export");
  auto sa = analysis::stats(random_records(3, 40, 8, 1), "zeta");
  auto sb = analysis::stats(random_records(4, 40, 8, 2), "alpha");
  analysis::export_stats_csv({sa, sb}, dir / "s1.csv");
  analysis::export_stats_csv({sa, sb}, dir / "s2.csv");
  const auto text = slurp(dir / "s1.csv");
  CHECK(text == slurp(dir / "s2.csv"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 2 * 320);
  CHECK(text.rfind("tag,layer,op,mean,variance\nalpha,1,1,", 0) == 0);
  analysis::export_diff_csv(analysis::diff_maps({sa, sb}), dir / "d.csv");
  const auto dtext = slurp(dir / "d.csv");
  CHECK(std::count(dtext.begin(), dtext.end(), '\n') == 1 + 2 * 320);
  CHECK(dtext.rfind("tag,layer,op,absdiff\n", 0) == 0);
  analysis::export_stats_csv({}, dir / "empty.csv");
  CHECK(slurp(dir / "empty.csv") == "tag,layer,op,mean,variance\n");
  CHECK_THROWS(analysis::export_stats_csv({sa}, dir / "no" / "such" / "dir" / "x.csv"));
  fs::remove_all(dir);
}
