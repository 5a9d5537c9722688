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

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "owan/gradcheck.hpp"
#include "owan/model.hpp"
#include "owan/ops.hpp"

using namespace owan;

namespace {

OWANConfig tiny(AttentionMode mode = AttentionMode::learned) {
  OWANConfig c;
  c.layers = 4;
  c.group_size = 4;
  c.channels = 4;
  c.attention_hidden = 4;
  c.residual_blocks = 1;
  c.attention_mode = mode;
  return c;
}

template <typename T>
Tensor<T> random_image(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto t = Tensor<T>::uninitialized(std::move(s));
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
void fill(Tensor<T>& t, T v) {
  for (auto& x : t.values()) x = v;
}

// Make biases and logits nonzero so tests exercise them.
void perturb_all(OWANParams<double>& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& [name, t] : p.store) {
    for (auto& v : t.values()) v += n(rng);
  }
}

}  // namespace

TEST_CASE("default operation set and config") {
  const auto ops = default_operations();
  REQUIRE(ops.size() == 8);
  const char* names[] = {"sep1", "sep3", "sep5", "sep7", "dil3", "dil5", "dil7", "avg3"};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(ops[i].name() == names[i]);
    CHECK(OpDescriptor::parse(names[i]) == ops[i]);
  }
  CHECK(ops[4].dilation == 2);
  CHECK(ops[0].dilation == 1);
  CHECK_THROWS_AS(OpDescriptor::parse("foo3"), ConfigError);
  OWANConfig c;
  CHECK(c.layers == 40);
  CHECK(c.groups() == 10);
  CHECK(c.channels == 16);
  CHECK(c.attention_hidden == 32);
  CHECK(c.residual_blocks == 4);
  c.layers = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_attention_mode("none") == AttentionMode::none);
  CHECK_THROWS_AS(parse_attention_mode("sometimes"), ConfigError);
}

TEST_CASE("build_network: structure, determinism and parameter count") {
  OWANConfig c;
  auto p = build_network<float>(c, 7);
  CHECK(p.layers.size() == 40);
  CHECK(p.heads.size() == 40);
  CHECK(p.layers[0].branches.size() == 8);
  CHECK(count_params(p) == expected_param_count(c));
  auto q = build_network<float>(c, 7);
  for (const auto& [name, t] : p.store) {
    auto a = t.values();
    auto b = q.store.at(name).values();
    REQUIRE(a.size() == b.size());
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  auto r = build_network<float>(c, 8);
  CHECK_FALSE(std::equal(p.stem.weight.values().begin(), p.stem.weight.values().end(),
                         r.stem.weight.values().begin()));

  OWANConfig small = c;
  small.layers = 4;
  auto s = build_network<double>(small, 1);
  CHECK(s.heads[0].w1.numel() + s.heads[0].w2.numel() == 32 * 16 + 8 * 32);

  OWANConfig wide = c;
  wide.channels = 32;
  CHECK(expected_param_count(wide) > expected_param_count(c));
}

TEST_CASE("parameter count closed form for a hand-sized config") {
  // L=0, K=0: stem (3*4*9 + 4) + output (4*3*9 + 3).
  OWANConfig c;
  c.layers = 0;
  c.residual_blocks = 0;
  c.channels = 4;
  auto p = build_network<double>(c, 0);
  CHECK(count_params(p) == 3 * 4 * 9 + 4 + 4 * 3 * 9 + 3);
  // One layer of sep1 + avg3, C=2, T=3, k=1.
  OWANConfig d;
  d.layers = 1;
  d.group_size = 1;
  d.residual_blocks = 0;
  d.channels = 2;
  d.attention_hidden = 3;
  d.ops = {OpDescriptor::parse("sep1"), OpDescriptor::parse("avg3")};
  const std::size_t stem = 3 * 2 * 9 + 2, out = 2 * 3 * 9 + 3;
  const std::size_t layer = (2 * 2 + 2) + (2 * 4 + 2);  // sep1 pointwise+bias, merge 2x4+bias
  const std::size_t head = 3 * 2 + 2 * 3, logits = 2;
  CHECK(count_params(build_network<double>(d, 0)) == stem + out + layer + head + logits);
}

TEST_CASE("initialization statistics") {
  OWANConfig c;
  auto p = build_network<double>(c, 3);
  for (double v : p.stem.bias.values()) CHECK(v == 0.0);
  for (double v : p.fixed_logits.values()) CHECK(v == 0.0);
  const double bound = std::sqrt(6.0 / (16 + 32));
  for (double v : p.heads[5].w1.values()) CHECK(std::abs(v) <= bound);
  // He-normal: std sqrt(2 / fan_in) with fan_in = 16 * 9.
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& b : p.blocks) {
    for (double v : b.conv1.weight.values()) {
      sq += v * v;
      ++n;
    }
  }
  CHECK(std::sqrt(sq / n) == doctest::Approx(std::sqrt(2.0 / 144.0)).epsilon(0.05));
}

TEST_CASE("network forward matches the loop oracle in every attention mode") {
  for (auto mode : {AttentionMode::learned, AttentionMode::none, AttentionMode::fixed}) {
    OWANConfig c = tiny(mode);
    c.layers = 8;
    auto p = build_network<double>(c, 5);
    perturb_all(p, 9);
    auto img = random_image<double>({1, 3, 9, 8}, 4);
    Tape<double> tape(false);
    auto res = network_forward(tape, p, img);
    auto ref = oracle::network(p, oracle::to_double(img), 9, 8);
    CHECK(oracle::max_rel_diff(oracle::to_double(res.output), ref.output) <= 1e-10);
    REQUIRE(res.attention.size() == ref.attention.size());
    for (std::size_t l = 0; l < ref.attention.size(); ++l) {
      CHECK(oracle::max_rel_diff(oracle::to_double(res.attention[l]), ref.attention[l]) <= 1e-12);
    }
  }
}

TEST_CASE("batched forward equals per-sample forward") {
  auto p = build_network<double>(tiny(), 2);
  perturb_all(p, 1);
  auto batch = random_image<double>({3, 3, 8, 8}, 6);
  Tape<double> tape(false);
  auto all = network_forward(tape, p, batch);
  for (std::size_t n = 0; n < 3; ++n) {
    std::vector<double> one(batch.values().begin() + n * 192, batch.values().begin() + (n + 1) * 192);
    auto ref = oracle::network(p, one, 8, 8);
    std::vector<double> got(all.output.values().begin() + n * 192, all.output.values().begin() + (n + 1) * 192);
    CHECK(oracle::max_rel_diff(got, ref.output) <= 1e-10);
  }
}

TEST_CASE("shape contracts") {
  OWANConfig c;
  auto p = build_network<float>(c, 0);
  Tape<float> tape(false);
  auto out = network_forward(tape, p, random_image<float>({1, 3, 63, 63}, 1));
  CHECK(out.output.shape() == Shape{1, 3, 63, 63});
  CHECK(out.attention.size() == 40);
  CHECK(attention_records(out, {"a"}).size() == 320);
  auto x = feature_extract(tape, p, random_image<float>({2, 3, 7, 11}, 1));
  CHECK(x.shape() == Shape{2, 16, 7, 11});
  auto branches = op_layer_forward(tape, p.layers[0], c.ops, x);
  REQUIRE(branches.size() == 8);
  for (const auto& b : branches) CHECK(b.shape() == x.shape());
  CHECK_THROWS_AS(feature_extract(tape, p, random_image<float>({1, 1, 8, 8}, 1)), ShapeError);
  CHECK_THROWS_AS(compute_group_attention(tape, p, x, 10), std::out_of_range);
}

TEST_CASE("feature extraction identities") {
  OWANConfig c = tiny();
  auto p = build_network<double>(c, 1);
  Tape<double> tape(false);
  auto zero = feature_extract(tape, p, Tensor<double>({1, 3, 8, 8}));
  for (double v : zero.values()) CHECK(v == 0.0);
  // Zero second conv of the block: block becomes the identity, x_0 = relu(stem(x)).
  fill(p.blocks[0].conv2.weight, 0.0);
  auto img = random_image<double>({1, 3, 8, 8}, 2);
  auto x = feature_extract(tape, p, img);
  auto stem = relu(tape, conv2d(tape, img, p.stem.weight, p.stem.bias));
  CHECK(oracle::max_rel_diff(oracle::to_double(x), oracle::to_double(stem)) == 0.0);
}

TEST_CASE("operation layer contracts") {
  OWANConfig c = tiny();
  auto p = build_network<double>(c, 1);
  auto& layer = p.layers[0];
  for (auto& br : layer.branches) {
    if (br.pointwise.defined()) fill(br.pointwise, 0.0);
  }
  Tape<double> tape(false);
  auto x = Tensor<double>::full({1, 4, 7, 7}, 0.37);
  auto out = op_layer_forward(tape, layer, c.ops, x);
  for (std::size_t o = 0; o < 7; ++o)
    for (double v : out[o].values()) CHECK(v == 0.0);
  for (double v : out[7].values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));

  // One-hot weights: the concatenated map is zero outside the chosen block.
  auto p2 = build_network<double>(c, 2);
  auto xr = random_image<double>({1, 4, 7, 7}, 3);
  for (std::size_t hot = 0; hot < 8; ++hot) {
    Tensor<double> w({1, 8});
    w.values()[hot] = 1.0;
    auto br = op_layer_forward(tape, p2.layers[0], c.ops, xr);
    std::vector<Tensor<double>> scaled;
    for (std::size_t o = 0; o < 8; ++o) scaled.push_back(scale_channels(tape, br[o], take_column(tape, w, o)));
    auto s = concat_channels(tape, scaled);
    CHECK(s.dim(1) == 32);
    const std::size_t block = 4 * 49;
    for (std::size_t i = 0; i < s.numel(); ++i) {
      if (i / block != hot) CHECK(s.values()[i] == 0.0);
    }
  }
}

TEST_CASE("zero merge convolution makes a layer and the whole stack the identity") {
  OWANConfig c;
  c.layers = 40;
  auto p = build_network<double>(c, 4);
  for (auto& l : p.layers) {
    fill(l.merge.weight, 0.0);
    fill(l.merge.bias, 0.0);
  }
  Tape<double> tape(false);
  auto img = random_image<double>({1, 3, 9, 9}, 8);
  auto x0 = feature_extract(tape, p, img);
  auto x = x0;
  for (std::size_t g = 0; g < c.groups(); ++g) {
    auto w = compute_group_attention(tape, p, x, g);
    for (std::size_t j = 0; j < c.group_size; ++j) x = owal_forward(tape, p.layers[g * 4 + j], c.ops, w[j], x);
  }
  auto a = x0.values();
  auto b = x.values();
  CHECK(std::equal(a.begin(), a.end(), b.begin()));
}

TEST_CASE("group attention: normalization, zero W2 and downstream invariance") {
  OWANConfig c;
  c.layers = 8;
  auto p = build_network<double>(c, 5);
  Tape<double> tape(false);
  auto x_head = random_image<double>({3, 16, 8, 8}, 9);
  fill(p.heads[1].w2, 0.0);
  auto w = compute_group_attention(tape, p, x_head, 0);
  REQUIRE(w.size() == 4);
  for (const auto& t : w) {
    CHECK(t.shape() == Shape{3, 8});
    for (std::size_t n = 0; n < 3; ++n) {
      double s = 0;
      for (std::size_t o = 0; o < 8; ++o) {
        const double v = t.values()[n * 8 + o];
        CHECK(v > 0.0);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  for (double v : w[1].values()) CHECK(v == doctest::Approx(0.125).epsilon(1e-15));

  // Full network: perturb the parameters of layers 2..4 of the first group.
  // The group's weights (computed from x_0) must not move; group 2 may.
  auto img = random_image<double>({1, 3, 8, 8}, 10);
  auto base = network_forward(tape, p, img);
  auto q = clone_params(p);
  for (std::size_t l = 1; l < 4; ++l) {
    for (auto& v : q.layers[l].merge.weight.values()) v += 0.5;
  }
  auto pert = network_forward(tape, q, img);
  for (std::size_t l = 0; l < 4; ++l) {
    auto a = base.attention[l].values();
    auto b = pert.attention[l].values();
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  auto a4 = base.attention[4].values();
  auto b4 = pert.attention[4].values();
  CHECK_FALSE(std::equal(a4.begin(), a4.end(), b4.begin()));
}

TEST_CASE("fixed mode with zero logits equals none mode with merge weights scaled by 1/|O|") {
  OWANConfig c = tiny(AttentionMode::fixed);
  auto pf = build_network<double>(c, 6);
  OWANConfig cn = c;
  cn.attention_mode = AttentionMode::none;
  auto pn = build_network<double>(cn, 6);
  for (auto& l : pn.layers) {
    for (auto& v : l.merge.weight.values()) v /= 8.0;
  }
  Tape<double> tape(false);
  auto img = random_image<double>({1, 3, 8, 8}, 1);
  auto of = network_forward(tape, pf, img);
  auto on = network_forward(tape, pn, img);
  CHECK(oracle::max_rel_diff(oracle::to_double(of.output), oracle::to_double(on.output)) <= 1e-12);
  CHECK(on.attention.empty());
  CHECK(of.attention.size() == 4);
  CHECK(of.attention[0].shape() == Shape{1, 8});
}

TEST_CASE("attention records: layout and batch broadcast of fixed weights") {
  auto p = build_network<double>(tiny(AttentionMode::fixed), 1);
  Tape<double> tape(false);
  auto res = network_forward(tape, p, random_image<double>({2, 3, 8, 8}, 1));
  auto recs = attention_records(res, {"s0", "s1"});
  REQUIRE(recs.size() == 2 * 4 * 8);
  CHECK(recs.front().sample_id == "s0");
  CHECK(recs.front().layer == 1);
  CHECK(recs.front().op == 1);
  CHECK(recs[8].layer == 2);
  CHECK(recs.back().sample_id == "s1");
  CHECK(recs.back().op == 8);
  for (const auto& r : recs) CHECK(r.weight == doctest::Approx(0.125));
}

TEST_CASE("end-to-end gradient check on the tiny network") {
  OWANConfig c;
  c.layers = 4;
  c.group_size = 4;
  c.channels = 4;
  c.attention_hidden = 4;
  c.residual_blocks = 1;
  auto p = build_network<double>(c, 12);
  perturb_all(p, 13);
  auto img = random_image<double>({1, 3, 8, 8}, 14);
  Tape<double> probe(false);
  auto out = network_forward(probe, p, img).output;
  auto target = out.clone();
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  for (auto& v : target.values()) v += (rng() & 1) ? mag(rng) : -mag(rng);
  std::vector<NamedTensor> inputs;
  for (const auto& [name, t] : p.store) {
    if (name.rfind("res.", 0) == 0 || name == "fixed_logits") continue;  // keep the run short
    inputs.emplace_back(name, t);
  }
  auto rep = gradcheck([&](Tape<double>& t) { return l1_loss(t, network_forward(t, p, img).output, target); },
                       inputs);
  CHECK_MESSAGE(rep.passed, rep.worst_input << "[" << rep.worst_index << "] err " << rep.max_relative_error);
}
