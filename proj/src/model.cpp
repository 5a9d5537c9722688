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
#include "owan/model.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "owan/ops.hpp"

namespace owan {

std::string OpDescriptor::name() const {
  switch (kind) {
    case OpKind::separable_conv:
      return "sep" + std::to_string(filter_size);
    case OpKind::dilated_separable_conv:
      return "dil" + std::to_string(filter_size);
    case OpKind::avg_pool:
      return "avg" + std::to_string(filter_size);
  }
  return "?";
}

OpDescriptor OpDescriptor::parse(const std::string& token) {
  auto fail = [&]() { return ConfigError("unknown operation '" + token + "' (expected sepN, dilN or avgN, N odd)"); };
  if (token.size() < 4) throw fail();
  const std::string prefix = token.substr(0, 3);
  std::size_t size = 0;
  try {
    std::size_t used = 0;
    size = std::stoul(token.substr(3), &used);
    if (used != token.size() - 3) throw fail();
  } catch (const std::logic_error&) {
    throw fail();
  }
  if (size == 0 || size % 2 == 0) throw fail();
  if (prefix == "sep") return {OpKind::separable_conv, size, 1};
  if (prefix == "dil") return {OpKind::dilated_separable_conv, size, 2};
  if (prefix == "avg") return {OpKind::avg_pool, size, 1};
  throw fail();
}

std::vector<OpDescriptor> default_operations() {
  return {
      {OpKind::separable_conv, 1, 1},         {OpKind::separable_conv, 3, 1},
      {OpKind::separable_conv, 5, 1},         {OpKind::separable_conv, 7, 1},
      {OpKind::dilated_separable_conv, 3, 2}, {OpKind::dilated_separable_conv, 5, 2},
      {OpKind::dilated_separable_conv, 7, 2}, {OpKind::avg_pool, 3, 1},
  };
}

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::learned:
      return "learned";
    case AttentionMode::none:
      return "none";
    case AttentionMode::fixed:
      return "fixed";
  }
  return "?";
}

AttentionMode parse_attention_mode(const std::string& text) {
  if (text == "learned") return AttentionMode::learned;
  if (text == "none") return AttentionMode::none;
  if (text == "fixed") return AttentionMode::fixed;
  throw ConfigError("attention_mode must be learned, none or fixed, got '" + text + "'");
}

void OWANConfig::validate() const {
  if (group_size == 0) throw ConfigError("group_size must be positive");
  if (layers % group_size != 0) {
    throw ConfigError("layers (" + std::to_string(layers) + ") must be divisible by group_size (" +
                      std::to_string(group_size) + ")");
  }
  if (channels == 0) throw ConfigError("channels must be positive");
  if (attention_hidden == 0) throw ConfigError("attention_hidden must be positive");
  if (in_channels != 1 && in_channels != 3) throw ConfigError("in_channels must be 1 or 3");
  if (ops.empty()) throw ConfigError("at least one operation is required");
  for (const auto& op : ops) {
    if (op.filter_size % 2 == 0) throw ConfigError("operation filter sizes must be odd");
    if (op.dilation == 0) throw ConfigError("operation dilation must be positive");
  }
}

std::size_t expected_param_count(const OWANConfig& config) {
  const std::size_t C = config.channels, in = config.in_channels, O = config.ops.size();
  std::size_t n = in * C * 9 + C;                            // stem
  n += config.residual_blocks * 2 * (C * C * 9 + C);         // residual blocks
  std::size_t per_layer = C * C * O + C;                      // merge conv
  for (const auto& op : config.ops) {
    if (op.kind == OpKind::avg_pool) continue;
    per_layer += C * C + C;                                   // pointwise + bias
    if (op.filter_size > 1) per_layer += C * op.filter_size * op.filter_size;
  }
  n += config.layers * per_layer;
  n += config.layers * (config.attention_hidden * C + O * config.attention_hidden);
  n += config.layers * O;                                     // fixed logits
  n += C * in * 9 + in;                                       // output conv
  return n;
}

namespace {

std::string indexed(const char* prefix, std::size_t i, const char* suffix) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s.%03zu.%s", prefix, i, suffix);
  return buf;
}

template <typename T>
class Initializer {
 public:
  Initializer(ParamStore<T>& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Tensor<T> he_normal(const std::string& name, Shape shape, std::size_t fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / double(fan_in)));
    return fill(name, std::move(shape), [&]() { return dist(rng_); });
  }

  Tensor<T> glorot_uniform(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    return fill(name, std::move(shape), [&]() { return dist(rng_); });
  }

  Tensor<T> zeros(const std::string& name, Shape shape) {
    return store_.add(name, Tensor<T>(std::move(shape)));
  }

  ConvParams<T> conv(const std::string& name, std::size_t out, std::size_t in, std::size_t f) {
    ConvParams<T> p;
    p.weight = he_normal(name + ".weight", {out, in, f, f}, in * f * f);
    p.bias = zeros(name + ".bias", {out});
    return p;
  }

 private:
  template <typename Draw>
  Tensor<T> fill(const std::string& name, Shape shape, Draw&& draw) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(draw());
    return store_.add(name, std::move(t));
  }

  ParamStore<T>& store_;
  std::mt19937_64 rng_;
};

template <typename T>
void attach_views(OWANParams<T>& p) {
  const auto& cfg = p.config;
  auto& s = p.store;
  auto conv = [&](const std::string& name) { return ConvParams<T>{s.at(name + ".weight"), s.at(name + ".bias")}; };
  p.stem = conv("stem");
  p.blocks.clear();
  for (std::size_t b = 0; b < cfg.residual_blocks; ++b) {
    p.blocks.push_back({conv(indexed("res", b, "conv1")), conv(indexed("res", b, "conv2"))});
  }
  p.layers.clear();
  p.heads.clear();
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    OpLayerParams<T> layer;
    for (std::size_t o = 0; o < cfg.ops.size(); ++o) {
      BranchParams<T> br;
      const std::string base = indexed("owal", l, ("op" + std::to_string(o)).c_str());
      if (cfg.ops[o].kind != OpKind::avg_pool) {
        if (cfg.ops[o].filter_size > 1) br.depthwise = s.at(base + ".depthwise");
        br.pointwise = s.at(base + ".pointwise");
        br.bias = s.at(base + ".bias");
      }
      layer.branches.push_back(br);
    }
    layer.merge = conv(indexed("owal", l, "merge"));
    p.layers.push_back(std::move(layer));
    p.heads.push_back({s.at(indexed("attention", l, "w1")), s.at(indexed("attention", l, "w2")), l});
  }
  p.output = conv("output");
  if (cfg.layers > 0) p.fixed_logits = s.at("fixed_logits");
}

}  // namespace

template <typename T>
OWANParams<T> build_network(const OWANConfig& config, std::uint64_t seed) {
  config.validate();
  OWANParams<T> p;
  p.config = config;
  Initializer<T> init(p.store, seed);
  const std::size_t C = config.channels, O = config.ops.size(), hidden = config.attention_hidden;

  init.conv("stem", C, config.in_channels, 3);
  for (std::size_t b = 0; b < config.residual_blocks; ++b) {
    init.conv(indexed("res", b, "conv1"), C, C, 3);
    init.conv(indexed("res", b, "conv2"), C, C, 3);
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (std::size_t o = 0; o < O; ++o) {
      const auto& op = config.ops[o];
      if (op.kind == OpKind::avg_pool) continue;
      const std::string base = indexed("owal", l, ("op" + std::to_string(o)).c_str());
      const std::size_t f = op.filter_size;
      if (f > 1) init.he_normal(base + ".depthwise", {C, f, f}, f * f);
      init.he_normal(base + ".pointwise", {C, C, 1, 1}, C);
      init.zeros(base + ".bias", {C});
    }
    init.conv(indexed("owal", l, "merge"), C, C * O, 1);
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    init.glorot_uniform(indexed("attention", l, "w1"), {hidden, C}, C, hidden);
    init.glorot_uniform(indexed("attention", l, "w2"), {O, hidden}, hidden, O);
  }
  init.conv("output", config.in_channels, C, 3);
  if (config.layers > 0) init.zeros("fixed_logits", {config.layers, O});
  attach_views(p);
  return p;
}

template <typename T>
OWANParams<T> clone_params(const OWANParams<T>& params) {
  OWANParams<T> p;
  p.config = params.config;
  for (const auto& [name, t] : params.store) p.store.add(name, t.clone());
  attach_views(p);
  return p;
}

template <typename T>
Tensor<T> feature_extract(Tape<T>& tape, const OWANParams<T>& params, const Tensor<T>& image) {
  if (image.rank() != 4 || image.dim(1) != params.config.in_channels) {
    throw ShapeError("feature_extract: expected N x " + std::to_string(params.config.in_channels) +
                     " x H x W image, got " + shape_string(image.shape()));
  }
  Tensor<T> x = relu(tape, conv2d(tape, image, params.stem.weight, params.stem.bias));
  for (const auto& block : params.blocks) {
    Tensor<T> h = relu(tape, conv2d(tape, x, block.conv1.weight, block.conv1.bias));
    h = conv2d(tape, h, block.conv2.weight, block.conv2.bias);
    x = add(tape, h, x);
  }
  return x;
}

template <typename T>
std::vector<Tensor<T>> compute_group_attention(Tape<T>& tape, const OWANParams<T>& params, const Tensor<T>& x_head,
                                               std::size_t group) {
  const auto& cfg = params.config;
  if (group >= cfg.groups()) {
    throw std::out_of_range("group index " + std::to_string(group) + " out of range (" +
                            std::to_string(cfg.groups()) + " groups)");
  }
  Tensor<T> z = global_channel_mean(tape, x_head);
  std::vector<Tensor<T>> weights;
  for (std::size_t j = 0; j < cfg.group_size; ++j) {
    const auto& head = params.heads[group * cfg.group_size + j];
    Tensor<T> hidden = relu(tape, dense_nobias(tape, head.w1, z));
    weights.push_back(softmax(tape, dense_nobias(tape, head.w2, hidden)));
  }
  return weights;
}

template <typename T>
std::vector<Tensor<T>> op_layer_forward(Tape<T>& tape, const OpLayerParams<T>& layer,
                                        const std::vector<OpDescriptor>& ops, const Tensor<T>& x) {
  if (layer.branches.size() != ops.size()) throw ShapeError("op_layer_forward: branch count mismatch");
  std::vector<Tensor<T>> outputs;
  outputs.reserve(ops.size());
  for (std::size_t o = 0; o < ops.size(); ++o) {
    const auto& op = ops[o];
    const auto& br = layer.branches[o];
    if (op.kind == OpKind::avg_pool) {
      outputs.push_back(avg_pool_same(tape, x, op.filter_size));
      continue;
    }
    Tensor<T> h = op.filter_size > 1 ? depthwise_conv2d(tape, x, br.depthwise, op.dilation) : x;
    outputs.push_back(relu(tape, conv2d(tape, h, br.pointwise, br.bias)));
  }
  return outputs;
}

template <typename T>
Tensor<T> owal_forward(Tape<T>& tape, const OpLayerParams<T>& layer, const std::vector<OpDescriptor>& ops,
                       const Tensor<T>& weights, const Tensor<T>& x_prev) {
  std::vector<Tensor<T>> branches = op_layer_forward(tape, layer, ops, x_prev);
  if (weights.defined()) {
    if (weights.rank() != 2 || weights.dim(1) != ops.size()) {
      throw ShapeError("owal_forward: attention weights " + shape_string(weights.shape()) + " do not cover " +
                       std::to_string(ops.size()) + " operations");
    }
    for (std::size_t o = 0; o < branches.size(); ++o) {
      branches[o] = scale_channels(tape, branches[o], take_column(tape, weights, o));
    }
  }
  Tensor<T> s = concat_channels(tape, branches);
  return add(tape, conv2d(tape, s, layer.merge.weight, layer.merge.bias), x_prev);
}

template <typename T>
ForwardResult<T> network_forward(Tape<T>& tape, const OWANParams<T>& params, const Tensor<T>& image) {
  const auto& cfg = params.config;
  ForwardResult<T> result;
  Tensor<T> x = feature_extract(tape, params, image);
  for (std::size_t g = 0; g < cfg.groups(); ++g) {
    std::vector<Tensor<T>> weights;
    switch (cfg.attention_mode) {
      case AttentionMode::learned:
        weights = compute_group_attention(tape, params, x, g);
        break;
      case AttentionMode::fixed:
        for (std::size_t j = 0; j < cfg.group_size; ++j) {
          weights.push_back(softmax(tape, select_row(tape, params.fixed_logits, g * cfg.group_size + j)));
        }
        break;
      case AttentionMode::none:
        weights.assign(cfg.group_size, Tensor<T>{});
        break;
    }
    for (std::size_t j = 0; j < cfg.group_size; ++j) {
      x = owal_forward(tape, params.layers[g * cfg.group_size + j], cfg.ops, weights[j], x);
      if (weights[j].defined()) result.attention.push_back(weights[j]);
    }
  }
  result.output = conv2d(tape, x, params.output.weight, params.output.bias);
  return result;
}

template <typename T>
std::vector<AttentionRecord> attention_records(const ForwardResult<T>& result,
                                               const std::vector<std::string>& sample_ids) {
  std::vector<AttentionRecord> records;
  for (std::size_t n = 0; n < sample_ids.size(); ++n) {
    for (std::size_t l = 0; l < result.attention.size(); ++l) {
      const auto& w = result.attention[l];
      const std::size_t M = w.dim(1);
      const std::size_t row = w.dim(0) == 1 ? 0 : n;
      if (row >= w.dim(0)) throw ShapeError("attention_records: more sample ids than batch entries");
      for (std::size_t o = 0; o < M; ++o) {
        records.push_back({sample_ids[n], l + 1, o + 1, static_cast<double>(w.values()[row * M + o])});
      }
    }
  }
  return records;
}

#define OWAN_INSTANTIATE_MODEL(T)                                                                              \
  template OWANParams<T> build_network<T>(const OWANConfig&, std::uint64_t);                                   \
  template OWANParams<T> clone_params(const OWANParams<T>&);                                                   \
  template Tensor<T> feature_extract(Tape<T>&, const OWANParams<T>&, const Tensor<T>&);                        \
  template std::vector<Tensor<T>> compute_group_attention(Tape<T>&, const OWANParams<T>&, const Tensor<T>&,    \
                                                          std::size_t);                                        \
  template std::vector<Tensor<T>> op_layer_forward(Tape<T>&, const OpLayerParams<T>&,                          \
                                                   const std::vector<OpDescriptor>&, const Tensor<T>&);        \
  template Tensor<T> owal_forward(Tape<T>&, const OpLayerParams<T>&, const std::vector<OpDescriptor>&,         \
                                  const Tensor<T>&, const Tensor<T>&);                                         \
  template ForwardResult<T> network_forward(Tape<T>&, const OWANParams<T>&, const Tensor<T>&);                 \
  template std::vector<AttentionRecord> attention_records(const ForwardResult<T>&,                             \
                                                          const std::vector<std::string>&);

OWAN_INSTANTIATE_MODEL(float)
OWAN_INSTANTIATE_MODEL(double)

}  // namespace owan
