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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "owan/image.hpp"
#include "owan/rng.hpp"

namespace owan::synth {

/// Square kernel, row-major, odd side length.
struct Kernel2D {
  std::size_t size = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * size + col]; }
  double sum() const;
};

Kernel2D gaussian_kernel(double sigma);

/// Index into [0, n) under half-sample symmetric reflection
/// (... c b a | a b c ... ), valid for any offset.
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n);

/// Per-channel convolution out(y, x) = sum_ij k(i, j) img(y + c - i, x + c - j)
/// with c the kernel center and symmetric reflection outside the image.
/// No clamping.
Image convolve_reflect(const Image& img, const Kernel2D& kernel);

Image apply_gaussian_blur(const Image& img, double sigma);
Image apply_gaussian_noise(const Image& img, double sigma_255, Rng& rng);

struct QuantTables {
  std::array<int, 64> luma{};
  std::array<int, 64> chroma{};
};

/// Base (quality 50) luminance and chrominance tables, row-major.
const std::array<int, 64>& base_luma_table();
const std::array<int, 64>& base_chroma_table();

QuantTables jpeg_quant_tables(int quality);

/// Orthonormal 8x8 DCT-II and its inverse on row-major blocks.
void dct8x8(const double* in, double* out);
void idct8x8(const double* in, double* out);

/// Baseline-JPEG quantization without chroma subsampling or entropy coding.
/// The result is rounded to 8-bit levels, as a decoder would return it.
Image apply_jpeg(const Image& img, int quality);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Particle-based camera-shake trajectory. The velocity starts at rest and
/// evolves as v <- inertia * v + N(0, jitter^2 I) + impulse, where an impulse
/// fires with `impulse_probability` per step and pushes the particle in a
/// uniformly random direction with magnitude `impulse_gain` * max(|v|, jitter).
/// The path is then rescaled to arc length `max_len`; a path that never
/// moved stays a single dot.
struct TrajectoryParams {
  std::size_t num_steps = 2000;
  double inertia = 0.7;
  double gaussian_jitter_std = 1.0;
  double impulse_probability = 0.005;
  double impulse_gain = 2.0;
  double max_len = 10.0;

  void validate() const;
};

std::vector<Point2> generate_trajectory(const TrajectoryParams& params, Rng& rng);
double arc_length(const std::vector<Point2>& points);

/// Bilinear splat of unit mass per point, normalized to sum 1. The points are
/// shifted by an integer offset so that the rounded midpoint of their
/// bounding box lands on the kernel center; kernel_size grows to the next odd
/// size that holds every point.
Kernel2D trajectory_to_kernel(const std::vector<Point2>& points, std::size_t kernel_size);

/// Convolution with reflection padding, clamped to [0, 1].
Image apply_motion_blur(const Image& img, const Kernel2D& psf);

enum class DistortionKind { external, gaussian_blur, motion_blur, gaussian_noise, jpeg };

std::string to_string(DistortionKind kind);

/// One stage. `value` is sigma (blur), sigma on the 0-255 scale (noise),
/// integer quality (jpeg) or maximum trajectory length in pixels (motion).
/// External stages carry no parameter: the distorted image is supplied.
struct DistortionSpec {
  DistortionKind kind = DistortionKind::gaussian_blur;
  double value = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Severity { mild, moderate, severe, unclassed };

std::string to_string(Severity severity);
Severity parse_severity(const std::string& text);

struct PipelineSpec {
  std::vector<DistortionSpec> stages;
  Severity severity = Severity::unclassed;

  const DistortionSpec* find(DistortionKind kind) const;
};

/// Applies one synthetic stage; external stages are rejected.
Image apply_distortion(const Image& img, const DistortionSpec& spec);
Image apply_pipeline(const Image& img, const PipelineSpec& pipeline);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameter ranges of the mixed protocol.
struct MixedRanges {
  Range noise_sigma{10.0, 30.0};
  Range jpeg_quality{15.0, 35.0};
  Range trajectory_len{10.0, 80.0};

  static MixedRanges standard() { return {}; }
  static MixedRanges novel_train() { return {{0.0, 20.0}, {60.0, 100.0}, {10.0, 40.0}}; }
  static MixedRanges novel_test() { return {{20.0, 40.0}, {15.0, 60.0}, {40.0, 80.0}}; }
};

/// Severity sub-ranges: each full range ([0,5] blur, [0,50] noise,
/// [10,100] quality) is cut into equal thirds; mild takes the low third of
/// blur and noise and the high third of quality. Real parameters are drawn
/// from [lo, hi); quality is drawn as an integer from the integers inside the
/// third, lower end exclusive except for the lowest third.
struct SeverityRanges {
  Range blur_sigma;
  Range noise_sigma;
  int quality_lo = 10;  // inclusive
  int quality_hi = 100; // inclusive
};

SeverityRanges severity_ranges(Severity severity);

/// Per-stage seeds are split from `sample_seed` by stage kind, so a pipeline
/// can be rebuilt from its parameters and the sample seed alone.
std::uint64_t stage_seed(std::uint64_t sample_seed, DistortionKind kind);

PipelineSpec sample_div2k_pipeline(Severity severity, std::uint64_t sample_seed);
PipelineSpec sample_mixed_pipeline(const MixedRanges& ranges, std::uint64_t sample_seed);

struct CropOrigin {
  std::size_t x = 0;
  std::size_t y = 0;
};

struct PatchSample {
  Image clean;
  Image distorted;
  PipelineSpec pipeline;
  std::string source_image_id;
  CropOrigin crop_origin;
};

/// Draws the parameters with one draw from `rng` (the sample seed), then applies
/// blur -> noise -> jpeg.
PatchSample synth_div2k_style(const Image& img, Severity severity, Rng& rng);

/// Picks a uniformly random nonempty subset of {noise, jpeg, motion} and
/// applies motion -> noise -> jpeg.
PatchSample synth_mixed(const Image& img, Rng& rng, const MixedRanges& ranges = MixedRanges::standard());

std::vector<CropOrigin> crop_patches(const Image& img, std::size_t size, std::size_t n, Rng& rng);

}  // namespace owan::synth
