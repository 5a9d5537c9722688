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
#include "owan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace owan {

namespace {

std::uint8_t to_level(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw ImageIoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ImageIoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image out(img.height, img.width, 3);
  for (std::size_t i = 0; i < buf.size(); ++i) out.pixels[i] = buf[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ImageIoError("PNG output supports 1 or 3 channels, got " + std::to_string(image.channels));
  }
  if (image.empty()) throw ImageIoError("refusing to write an empty image to " + path.string());
  std::vector<std::uint8_t> buf(image.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_level(image.pixels[i]);
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw ImageIoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (auto& v : out.pixels) v = to_level(v) / 255.0;
  return out;
}

Image clamp01(Image image) {
  for (auto& v : image.pixels) v = std::clamp(v, 0.0, 1.0);
  return image;
}

Image crop(const Image& image, std::size_t y, std::size_t x, std::size_t height, std::size_t width) {
  if (y + height > image.height || x + width > image.width) {
    throw DomainError("crop window exceeds image bounds");
  }
  Image out(height, width, image.channels);
  const std::size_t row = width * image.channels;
  for (std::size_t r = 0; r < height; ++r) {
    const double* src = &image.pixels[((y + r) * image.width + x) * image.channels];
    std::copy(src, src + row, out.pixels.begin() + static_cast<std::ptrdiff_t>(r * row));
  }
  return out;
}

Image flip_horizontal(const Image& image) {
  Image out(image.height, image.width, image.channels);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
  return out;
}

std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ImageIoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

template <typename T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ShapeError("cannot pack zero images");
  const Image& first = *images.front();
  for (const Image* im : images) {
    if (!im->same_shape(first)) throw ShapeError("images in a batch must share one shape");
  }
  const std::size_t n = images.size(), c = first.channels, h = first.height, w = first.width;
  auto out = Tensor<T>::uninitialized({n, c, h, w});
  auto v = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& px = images[i]->pixels;
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* plane = v.data() + (i * c + ch) * h * w;
      for (std::size_t p = 0; p < h * w; ++p) plane[p] = static_cast<T>(px[p * c + ch]);
    }
  }
  return out;
}

template <typename T>
Image tensor_to_image(const Tensor<T>& tensor, std::size_t n) {
  if (tensor.rank() != 4) throw ShapeError("expected an N x C x H x W tensor, got " + shape_string(tensor.shape()));
  if (n >= tensor.dim(0)) throw ShapeError("sample index out of range");
  const std::size_t c = tensor.dim(1), h = tensor.dim(2), w = tensor.dim(3);
  Image out(h, w, c);
  auto v = tensor.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* plane = v.data() + (n * c + ch) * h * w;
    for (std::size_t p = 0; p < h * w; ++p) out.pixels[p * c + ch] = static_cast<double>(plane[p]);
  }
  return out;
}

template Tensor<float> images_to_tensor<float>(const std::vector<const Image*>&);
template Tensor<double> images_to_tensor<double>(const std::vector<const Image*>&);
template Image tensor_to_image<float>(const Tensor<float>&, std::size_t);
template Image tensor_to_image<double>(const Tensor<double>&, std::size_t);

}  // namespace owan
