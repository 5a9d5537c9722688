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

#include <cstddef>
#include <vector>

#include "owan/tape.hpp"
#include "owan/tensor.hpp"

// Differentiable primitives. Every op computes its forward value eagerly and,
// when the tape is recording and some input requires a gradient, appends a
// backward rule to the tape.

namespace owan {

/// Stride-1 convolution with zero "same" padding of dilation*(f-1)/2.
/// input N x Cin x H x W, weight Cout x Cin x f x f (f odd), bias Cout or
/// undefined for no bias.
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t dilation = 1);

/// Per-channel spatial convolution; weight is C x f x f. Output channel c
/// depends only on input channel c.
template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight, std::size_t dilation = 1);

/// Stride-1 average pooling with same-size output. The divisor at each
/// location counts in-bounds taps only, so constant maps pass unchanged.
template <typename T>
Tensor<T> avg_pool_same(Tape<T>& tape, const Tensor<T>& input, std::size_t window = 3);

/// max(0, x), with derivative 0 at x == 0.
template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& input);

/// N x C x H x W -> N x C of spatial means.
template <typename T>
Tensor<T> global_channel_mean(Tape<T>& tape, const Tensor<T>& input);

/// weight (M x C) times v, where v is a C vector or a batch N x C of them.
template <typename T>
Tensor<T> dense_nobias(Tape<T>& tape, const Tensor<T>& weight, const Tensor<T>& v);

/// Numerically stable softmax over the last axis (a vector or N x M rows).
template <typename T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& logits);

/// Column j of an N x M matrix, as an N vector.
template <typename T>
Tensor<T> take_column(Tape<T>& tape, const Tensor<T>& matrix, std::size_t column);

/// Row r of an R x M matrix, as a 1 x M matrix.
template <typename T>
Tensor<T> select_row(Tape<T>& tape, const Tensor<T>& matrix, std::size_t row);

/// Multiplies every element of sample n by s[n]. s holds either one value
/// (shared by the batch) or one per sample.
template <typename T>
Tensor<T> scale_channels(Tape<T>& tape, const Tensor<T>& map, const Tensor<T>& s);

/// Channel-axis concatenation in argument order.
template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const std::vector<Tensor<T>>& maps);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// (1/N) * sum_n ||pred_n - target_n||_1 with N the leading (batch) axis.
/// The subgradient of |.| at 0 is 0.
template <typename T>
Tensor<T> l1_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input);

}  // namespace owan
