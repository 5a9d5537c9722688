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

#include <cstdint>
#include <string>
#include <vector>

#include "owan/param_store.hpp"
#include "owan/tape.hpp"
#include "owan/tensor.hpp"

namespace owan {

enum class OpKind { separable_conv, dilated_separable_conv, avg_pool };

/// One branch of the operation layer.
struct OpDescriptor {
  OpKind kind = OpKind::separable_conv;
  std::size_t filter_size = 3;
  std::size_t dilation = 1;

  /// Short token such as "sep3", "dil5" or "avg3".
  std::string name() const;
  static OpDescriptor parse(const std::string& token);
  bool operator==(const OpDescriptor&) const = default;
};

/// Separable 1x1/3x3/5x5/7x7, dilated (rate 2) separable 3x3/5x5/7x7, and
/// 3x3 average pooling, in that order.
std::vector<OpDescriptor> default_operations();

enum class AttentionMode { learned, none, fixed };

std::string to_string(AttentionMode mode);
AttentionMode parse_attention_mode(const std::string& text);

struct OWANConfig {
  std::size_t layers = 40;           // operation-wise attention layers
  std::size_t group_size = 4;        // layers sharing one attention computation
  std::size_t channels = 16;         // feature channels throughout the network
  std::size_t attention_hidden = 32; // rows of the first attention matrix
  std::size_t residual_blocks = 4;   // feature-extraction residual blocks
  std::size_t in_channels = 3;       // 1 (gray) or 3 (RGB)
  std::vector<OpDescriptor> ops = default_operations();
  AttentionMode attention_mode = AttentionMode::learned;

  /// Throws ConfigError. layers == 0 is accepted as a degenerate network
  /// (feature extraction followed directly by the output conv).
  void validate() const;
  std::size_t groups() const { return group_size ? layers / group_size : 0; }
  bool operator==(const OWANConfig&) const = default;
};

template <typename T>
struct ConvParams {
  Tensor<T> weight;
  Tensor<T> bias;
};

/// Depthwise stage (undefined for 1x1 filters), pointwise C x C x 1 x 1
/// stage and its bias. All undefined for parameter-free branches.
template <typename T>
struct BranchParams {
  Tensor<T> depthwise;
  Tensor<T> pointwise;
  Tensor<T> bias;
};

template <typename T>
struct OpLayerParams {
  std::vector<BranchParams<T>> branches;
  ConvParams<T> merge;  // 1x1 conv, C*|O| -> C
};

template <typename T>
struct AttentionHead {
  Tensor<T> w1;  // hidden x C
  Tensor<T> w2;  // |O| x hidden
  std::size_t target_layer = 0;
};

template <typename T>
struct ResidualBlockParams {
  ConvParams<T> conv1;
  ConvParams<T> conv2;
};

/// All learnable weights. The struct fields and `store` alias the same
/// tensors; the store gives them stable names.
template <typename T>
struct OWANParams {
  OWANConfig config;
  ParamStore<T> store;
  ConvParams<T> stem;
  std::vector<ResidualBlockParams<T>> blocks;
  std::vector<OpLayerParams<T>> layers;
  std::vector<AttentionHead<T>> heads;
  ConvParams<T> output;
  Tensor<T> fixed_logits;  // layers x |O|; undefined when layers == 0
};

/// Attention weight of one operation in one layer for one sample.
struct AttentionRecord {
  std::string sample_id;
  std::size_t layer = 0;  // 1-based
  std::size_t op = 0;     // 1-based
  double weight = 0.0;
};

template <typename T>
struct ForwardResult {
  Tensor<T> output;
  /// Per layer, the weights actually applied: N x |O| (learned) or
  /// 1 x |O| (fixed). Empty when attention_mode is none.
  std::vector<Tensor<T>> attention;
};

/// Deterministic initialization: He-normal conv weights, Glorot-uniform
/// attention matrices, zero biases and zero fixed logits.
template <typename T>
OWANParams<T> build_network(const OWANConfig& config, std::uint64_t seed);

/// Deep copy with fresh tensors (and a fresh store).
template <typename T>
OWANParams<T> clone_params(const OWANParams<T>& params);

/// Stem conv + ReLU, then residual blocks (conv, ReLU, conv, add input).
template <typename T>
Tensor<T> feature_extract(Tape<T>& tape, const OWANParams<T>& params, const Tensor<T>& image);

/// Attention weights for every layer of group `group`, all computed from
/// the group-head input: softmax(W2 relu(W1 mean_hw(x_head))).
template <typename T>
std::vector<Tensor<T>> compute_group_attention(Tape<T>& tape, const OWANParams<T>& params, const Tensor<T>& x_head,
                                               std::size_t group);

/// The |O| parallel branch outputs, each N x C x H x W.
template <typename T>
std::vector<Tensor<T>> op_layer_forward(Tape<T>& tape, const OpLayerParams<T>& layer,
                                        const std::vector<OpDescriptor>& ops, const Tensor<T>& x);

/// x_prev + merge(concat_o(w_o * h_o)). `weights` is N x |O| or 1 x |O|;
/// an undefined tensor applies weight 1 to every branch.
template <typename T>
Tensor<T> owal_forward(Tape<T>& tape, const OpLayerParams<T>& layer, const std::vector<OpDescriptor>& ops,
                       const Tensor<T>& weights, const Tensor<T>& x_prev);

template <typename T>
ForwardResult<T> network_forward(Tape<T>& tape, const OWANParams<T>& params, const Tensor<T>& image);

/// Flattens applied attention weights into records. sample_ids names the
/// batch entries in order.
template <typename T>
std::vector<AttentionRecord> attention_records(const ForwardResult<T>& result,
                                               const std::vector<std::string>& sample_ids);

template <typename T>
std::size_t count_params(const OWANParams<T>& params) {
  return params.store.scalar_count();
}

/// Closed-form parameter count for a configuration.
std::size_t expected_param_count(const OWANConfig& config);

/// Copies values from one parameter set into another of the same config.
template <typename To, typename From>
void copy_params(const OWANParams<From>& from, OWANParams<To>& to) {
  for (auto& [name, dst] : to.store) {
    auto src = from.store.at(name).values();
    auto out = dst.values();
    if (src.size() != out.size()) throw ShapeError("parameter '" + name + "' size mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(src[i]);
  }
}

}  // namespace owan
