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

// Straight-loop reference implementations used to check the optimized code.
// They favour obviousness over speed and share no code with the library.

#include <cstdint>
#include <string>
#include <vector>

#include "owan/distortion.hpp"
#include "owan/image.hpp"
#include "owan/model.hpp"
#include "owan/tensor.hpp"

namespace oracle {

using owan::Image;
using owan::Tensor;

/// Zero-padded "same" convolution (cross-correlation), NCHW, any dilation.
std::vector<double> conv2d(const std::vector<double>& x, std::size_t n, std::size_t cin, std::size_t h, std::size_t w,
                           const std::vector<double>& weight, std::size_t cout, std::size_t f,
                           const std::vector<double>* bias, std::size_t dilation);

std::vector<double> depthwise(const std::vector<double>& x, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                              const std::vector<double>& weight, std::size_t f, std::size_t dilation);

/// Average over in-bounds taps of a window x window neighbourhood.
std::vector<double> avg_pool(const std::vector<double>& x, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                             std::size_t window);

/// Mirror index by repeated folding (... c b a | a b c ...).
long mirror(long i, long n);

/// out(y, x) = sum_ij k(i, j) img(y + c - i, x + c - j), mirrored borders.
Image convolve(const Image& img, const owan::synth::Kernel2D& k);

/// SSIM from an explicit 11x11 window sum at every valid position.
double ssim(const Image& a, const Image& b);

double mean(const std::vector<double>& v);
double population_variance(const std::vector<double>& v);

/// Network forward pass written as plain loops over doubles, for one image
/// (1 x C x H x W). Returns the output map and the applied attention rows.
struct NetOutput {
  std::vector<double> output;
  std::vector<std::vector<double>> attention;  // per layer, |O| weights
};
NetOutput network(const owan::OWANParams<double>& p, const std::vector<double>& image, std::size_t h, std::size_t w);

/// Smooth, natural-looking RGB test scene: gradients, soft discs, stripes
/// and mild texture, quantized to 8-bit levels.
Image scene(std::size_t h, std::size_t w, std::uint64_t seed);

/// Uniform random image quantized to 8-bit levels.
Image random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed);

template <typename T>
std::vector<double> to_double(const Tensor<T>& t) {
  std::vector<double> out;
  for (auto v : t.values()) out.push_back(static_cast<double>(v));
  return out;
}

/// max_i |a_i - b_i| / max(1, |b_i|)
double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b);
double max_abs_diff(const Image& a, const Image& b);

/// Unique scratch directory under the system temp dir.
std::string temp_dir(const std::string& label);

}  // namespace oracle
