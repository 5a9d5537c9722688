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

#include <filesystem>
#include <vector>

#include "owan/tensor.hpp"

namespace owan {

/// Interleaved H x W x C image with real samples, nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  bool empty() const { return pixels.empty(); }
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit PNG as RGB in [0, 1]; gray, palette and alpha inputs are
/// converted.
Image read_png(const std::filesystem::path& path);

/// Writes an 8-bit PNG (gray or RGB); samples are clamped to [0, 1] and
/// rounded to the nearest level.
void write_png(const std::filesystem::path& path, const Image& image);

/// Rounds each sample to the nearest of the 256 levels k/255, after
/// clamping; the value an image takes after a PNG round trip.
Image quantize_8bit(const Image& image);

Image clamp01(Image image);

Image crop(const Image& image, std::size_t y, std::size_t x, std::size_t height, std::size_t width);

Image flip_horizontal(const Image& image);

/// Sorted list of *.png files directly inside dir.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

/// Packs images of identical shape into an N x C x H x W tensor.
template <typename T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& images);

/// Extracts sample n of an N x C x H x W tensor.
template <typename T>
Image tensor_to_image(const Tensor<T>& tensor, std::size_t n);

}  // namespace owan
