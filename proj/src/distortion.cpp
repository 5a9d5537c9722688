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
#include "owan/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace owan::synth {

double Kernel2D::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

Kernel2D gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("gaussian sigma must be finite and >= 0");
  if (sigma == 0.0) return {1, {1.0}};
  const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  Kernel2D k{2 * radius + 1, {}};
  k.values.resize(k.size * k.size);
  const double r = static_cast<double>(radius);
  for (std::size_t i = 0; i < k.size; ++i) {
    for (std::size_t j = 0; j < k.size; ++j) {
      const double dy = static_cast<double>(i) - r, dx = static_cast<double>(j) - r;
      k.values[i * k.size + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  const double s = k.sum();
  for (auto& v : k.values) v /= s;
  return k;
}

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  const std::ptrdiff_t period = 2 * n;
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

Image convolve_reflect(const Image& img, const Kernel2D& kernel) {
  if (kernel.size % 2 == 0) throw DomainError("kernel size must be odd");
  if (img.empty()) return img;
  const auto h = static_cast<std::ptrdiff_t>(img.height), w = static_cast<std::ptrdiff_t>(img.width);
  const auto ks = static_cast<std::ptrdiff_t>(kernel.size), c = ks / 2;
  const std::size_t ch = img.channels;

  // Reflect-padded copy so the inner loop has no index arithmetic.
  const std::ptrdiff_t ph = h + 2 * c, pw = w + 2 * c;
  std::vector<double> padded(static_cast<std::size_t>(ph * pw) * ch);
  for (std::ptrdiff_t y = 0; y < ph; ++y) {
    const std::ptrdiff_t sy = reflect_index(y - c, h);
    for (std::ptrdiff_t x = 0; x < pw; ++x) {
      const std::ptrdiff_t sx = reflect_index(x - c, w);
      for (std::size_t k = 0; k < ch; ++k) {
        padded[static_cast<std::size_t>(y * pw + x) * ch + k] = img.at(sy, sx, k);
      }
    }
  }

  Image out(img.height, img.width, ch);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (std::ptrdiff_t i = 0; i < ks; ++i) {
          // img(y + c - i, x + c - j) sits at padded row y + 2c - i.
          const double* row = &padded[static_cast<std::size_t>((y + 2 * c - i) * pw + x + 2 * c) * ch + k];
          const double* krow = &kernel.values[static_cast<std::size_t>(i * ks)];
          for (std::ptrdiff_t j = 0; j < ks; ++j) acc += krow[j] * row[-j * static_cast<std::ptrdiff_t>(ch)];
        }
        out.at(y, x, k) = acc;
      }
    }
  }
  return out;
}

Image apply_gaussian_blur(const Image& img, double sigma) {
  const Kernel2D k = gaussian_kernel(sigma);
  if (k.size == 1) return clamp01(img);
  return clamp01(convolve_reflect(img, k));
}

Image apply_gaussian_noise(const Image& img, double sigma_255, Rng& rng) {
  if (!(sigma_255 >= 0.0) || !std::isfinite(sigma_255)) throw DomainError("noise sigma must be finite and >= 0");
  Image out = img;
  if (sigma_255 == 0.0) return clamp01(std::move(out));
  std::normal_distribution<double> normal(0.0, sigma_255 / 255.0);
  for (auto& v : out.pixels) v += normal(rng);
  return clamp01(std::move(out));
}

const std::array<int, 64>& base_luma_table() {
  static const std::array<int, 64> t = {
      16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
      14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
      18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
      49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  return t;
}

const std::array<int, 64>& base_chroma_table() {
  static const std::array<int, 64> t = {
      17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
      24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
      99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
      99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  return t;
}

QuantTables jpeg_quant_tables(int quality) {
  if (quality < 1 || quality > 100) throw DomainError("JPEG quality must lie in [1, 100]");
  const long scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  auto scaled = [scale](int base) {
    const long e = (base * scale + 50) / 100;
    return static_cast<int>(std::clamp<long>(e, 1, 255));
  };
  QuantTables q;
  for (std::size_t i = 0; i < 64; ++i) {
    q.luma[i] = scaled(base_luma_table()[i]);
    q.chroma[i] = scaled(base_chroma_table()[i]);
  }
  return q;
}

namespace {

const std::array<double, 64>& dct_matrix() {
  static const std::array<double, 64> m = [] {
    std::array<double, 64> a{};
    for (int k = 0; k < 8; ++k) {
      const double alpha = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) a[k * 8 + n] = alpha * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
    }
    return a;
  }();
  return m;
}

}  // namespace

void dct8x8(const double* in, double* out) {
  const auto& m = dct_matrix();
  double tmp[64];
  for (int r = 0; r < 8; ++r)
    for (int k = 0; k < 8; ++k) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += m[k * 8 + n] * in[r * 8 + n];
      tmp[r * 8 + k] = s;
    }
  for (int k = 0; k < 8; ++k)
    for (int c = 0; c < 8; ++c) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += m[k * 8 + n] * tmp[n * 8 + c];
      out[k * 8 + c] = s;
    }
}

void idct8x8(const double* in, double* out) {
  const auto& m = dct_matrix();
  double tmp[64];
  for (int r = 0; r < 8; ++r)
    for (int n = 0; n < 8; ++n) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += m[k * 8 + n] * in[r * 8 + k];
      tmp[r * 8 + n] = s;
    }
  for (int n = 0; n < 8; ++n)
    for (int c = 0; c < 8; ++c) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += m[k * 8 + n] * tmp[k * 8 + c];
      out[n * 8 + c] = s;
    }
}

Image apply_jpeg(const Image& img, int quality) {
  const QuantTables tables = jpeg_quant_tables(quality);
  if (img.channels != 3) throw DomainError("JPEG simulation expects an RGB image");
  if (img.empty()) return img;
  const std::size_t h = img.height, w = img.width;
  const std::size_t ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;

  // Planes on the 0-255 scale, level-shifted by 128, edge-replicated.
  std::array<std::vector<double>, 3> planes;
  for (auto& p : planes) p.resize(ph * pw);
  for (std::size_t y = 0; y < ph; ++y) {
    const std::size_t sy = std::min(y, h - 1);
    for (std::size_t x = 0; x < pw; ++x) {
      const std::size_t sx = std::min(x, w - 1);
      const double r = img.at(sy, sx, 0) * 255.0, g = img.at(sy, sx, 1) * 255.0, b = img.at(sy, sx, 2) * 255.0;
      planes[0][y * pw + x] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
      planes[1][y * pw + x] = -0.168736 * r - 0.331264 * g + 0.5 * b;
      planes[2][y * pw + x] = 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }

  double block[64], coef[64];
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& table = p == 0 ? tables.luma : tables.chroma;
    auto& plane = planes[p];
    for (std::size_t by = 0; by < ph; by += 8) {
      for (std::size_t bx = 0; bx < pw; bx += 8) {
        for (std::size_t r = 0; r < 8; ++r)
          for (std::size_t c = 0; c < 8; ++c) block[r * 8 + c] = plane[(by + r) * pw + bx + c];
        dct8x8(block, coef);
        for (std::size_t i = 0; i < 64; ++i) coef[i] = std::round(coef[i] / table[i]) * table[i];
        idct8x8(coef, block);
        for (std::size_t r = 0; r < 8; ++r)
          for (std::size_t c = 0; c < 8; ++c) plane[(by + r) * pw + bx + c] = block[r * 8 + c];
      }
    }
  }

  Image out(h, w, 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double Y = planes[0][y * pw + x] + 128.0, cb = planes[1][y * pw + x], cr = planes[2][y * pw + x];
      out.at(y, x, 0) = (Y + 1.402 * cr) / 255.0;
      out.at(y, x, 1) = (Y - 0.344136 * cb - 0.714136 * cr) / 255.0;
      out.at(y, x, 2) = (Y + 1.772 * cb) / 255.0;
    }
  }
  // A decoder hands back 8-bit samples.
  return quantize_8bit(out);
}

void TrajectoryParams::validate() const {
  if (num_steps == 0) throw DomainError("trajectory needs at least one step");
  if (!(inertia >= 0.0 && inertia < 1.0)) throw DomainError("trajectory inertia must lie in [0, 1)");
  if (!(impulse_probability >= 0.0 && impulse_probability <= 1.0)) {
    throw DomainError("impulse probability must lie in [0, 1]");
  }
  if (!(gaussian_jitter_std >= 0.0) || !(impulse_gain >= 0.0)) throw DomainError("trajectory scales must be >= 0");
  if (!(max_len >= 0.0) || !std::isfinite(max_len)) throw DomainError("trajectory length must be finite and >= 0");
}

double arc_length(const std::vector<Point2>& points) {
  double len = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    len += std::hypot(points[i].x - points[i - 1].x, points[i].y - points[i - 1].y);
  }
  return len;
}

std::vector<Point2> generate_trajectory(const TrajectoryParams& params, Rng& rng) {
  params.validate();
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point2> pts;
  pts.reserve(params.num_steps);
  Point2 pos, vel;
  pts.push_back(pos);
  for (std::size_t t = 1; t < params.num_steps; ++t) {
    // Every step consumes the same draws so the stream stays aligned.
    const double jx = jitter(rng), jy = jitter(rng);
    const double fire = unit(rng), angle = unit(rng) * 2.0 * std::numbers::pi;
    vel.x = params.inertia * vel.x + params.gaussian_jitter_std * jx;
    vel.y = params.inertia * vel.y + params.gaussian_jitter_std * jy;
    if (fire < params.impulse_probability) {
      const double mag = params.impulse_gain * std::max(std::hypot(vel.x, vel.y), params.gaussian_jitter_std);
      vel.x += mag * std::cos(angle);
      vel.y += mag * std::sin(angle);
    }
    pos.x += vel.x;
    pos.y += vel.y;
    pts.push_back(pos);
  }
  const double len = arc_length(pts);
  if (len > 0.0) {
    const double s = params.max_len / len;
    for (auto& p : pts) {
      p.x *= s;
      p.y *= s;
    }
  }
  return pts;
}

Kernel2D trajectory_to_kernel(const std::vector<Point2>& points, std::size_t kernel_size) {
  if (points.empty()) throw DomainError("cannot build a PSF from an empty trajectory");
  if (kernel_size == 0) kernel_size = 1;
  if (kernel_size % 2 == 0) ++kernel_size;
  double xmin = points[0].x, xmax = xmin, ymin = points[0].y, ymax = ymin;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("trajectory contains non-finite points");
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double mx = std::round(0.5 * (xmin + xmax)), my = std::round(0.5 * (ymin + ymax));
  // Offsets from the center must stay within +-(size-1)/2 on both ends.
  const double reach = std::max({mx - xmin, xmax - mx, my - ymin, ymax - my});
  while (static_cast<double>((kernel_size - 1) / 2) < reach) kernel_size += 2;

  Kernel2D k{kernel_size, std::vector<double>(kernel_size * kernel_size, 0.0)};
  const double center = static_cast<double>((kernel_size - 1) / 2);
  const auto last = static_cast<std::ptrdiff_t>(kernel_size) - 1;
  for (const auto& p : points) {
    const double x = p.x - mx + center, y = p.y - my + center;
    const double fx = std::floor(x), fy = std::floor(y);
    const double ax = x - fx, ay = y - fy;
    const auto ix = static_cast<std::ptrdiff_t>(fx), iy = static_cast<std::ptrdiff_t>(fy);
    auto deposit = [&](std::ptrdiff_t r, std::ptrdiff_t c, double wgt) {
      if (wgt == 0.0) return;
      r = std::clamp<std::ptrdiff_t>(r, 0, last);
      c = std::clamp<std::ptrdiff_t>(c, 0, last);
      k.values[static_cast<std::size_t>(r) * kernel_size + static_cast<std::size_t>(c)] += wgt;
    };
    deposit(iy, ix, (1.0 - ax) * (1.0 - ay));
    deposit(iy, ix + 1, ax * (1.0 - ay));
    deposit(iy + 1, ix, (1.0 - ax) * ay);
    deposit(iy + 1, ix + 1, ax * ay);
  }
  const double s = k.sum();
  for (auto& v : k.values) v /= s;
  return k;
}

Image apply_motion_blur(const Image& img, const Kernel2D& psf) {
  if (psf.values.size() != psf.size * psf.size || psf.size == 0) throw DomainError("malformed PSF");
  if (std::abs(psf.sum() - 1.0) > 1e-6) throw DomainError("PSF must sum to 1");
  return clamp01(convolve_reflect(img, psf));
}

std::string to_string(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::external: return "external";
    case DistortionKind::gaussian_blur: return "gaussian_blur";
    case DistortionKind::motion_blur: return "motion_blur";
    case DistortionKind::gaussian_noise: return "gaussian_noise";
    case DistortionKind::jpeg: return "jpeg";
  }
  return "unknown";
}

void DistortionSpec::validate() const {
  switch (kind) {
    case DistortionKind::gaussian_blur:
    case DistortionKind::gaussian_noise:
      if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError(to_string(kind) + " sigma must be >= 0");
      break;
    case DistortionKind::jpeg:
      if (value < 1.0 || value > 100.0 || value != std::floor(value)) {
        throw DomainError("JPEG quality must be an integer in [1, 100]");
      }
      break;
    case DistortionKind::motion_blur:
      if (!(value >= 1.0) || !std::isfinite(value)) throw DomainError("maximum trajectory length must be >= 1");
      break;
    case DistortionKind::external: break;
  }
}

std::string to_string(Severity severity) {
  switch (severity) {
    case Severity::mild: return "mild";
    case Severity::moderate: return "moderate";
    case Severity::severe: return "severe";
    case Severity::unclassed: return "unclassed";
  }
  return "unclassed";
}

Severity parse_severity(const std::string& text) {
  if (text == "mild") return Severity::mild;
  if (text == "moderate") return Severity::moderate;
  if (text == "severe") return Severity::severe;
  if (text == "unclassed" || text.empty()) return Severity::unclassed;
  throw ConfigError("unknown severity '" + text + "'");
}

const DistortionSpec* PipelineSpec::find(DistortionKind kind) const {
  for (const auto& s : stages) {
    if (s.kind == kind) return &s;
  }
  return nullptr;
}

Image apply_distortion(const Image& img, const DistortionSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case DistortionKind::gaussian_blur: return apply_gaussian_blur(img, spec.value);
    case DistortionKind::gaussian_noise: {
      Rng rng(spec.seed);
      return apply_gaussian_noise(img, spec.value, rng);
    }
    case DistortionKind::jpeg: return apply_jpeg(img, static_cast<int>(spec.value));
    case DistortionKind::motion_blur: {
      Rng rng(spec.seed);
      TrajectoryParams tp;
      tp.max_len = spec.value;
      const auto pts = generate_trajectory(tp, rng);
      return apply_motion_blur(img, trajectory_to_kernel(pts, 1));
    }
    case DistortionKind::external: break;
  }
  throw DomainError("external distortions are supplied as images and cannot be synthesized");
}

Image apply_pipeline(const Image& img, const PipelineSpec& pipeline) {
  Image out = img;
  for (const auto& s : pipeline.stages) out = apply_distortion(out, s);
  return out;
}

SeverityRanges severity_ranges(Severity severity) {
  switch (severity) {
    case Severity::mild: return {{0.0, 5.0 / 3.0}, {0.0, 50.0 / 3.0}, 71, 100};
    case Severity::moderate: return {{5.0 / 3.0, 10.0 / 3.0}, {50.0 / 3.0, 100.0 / 3.0}, 41, 70};
    case Severity::severe: return {{10.0 / 3.0, 5.0}, {100.0 / 3.0, 50.0}, 10, 40};
    case Severity::unclassed: break;
  }
  throw DomainError("severity must be mild, moderate or severe");
}

std::uint64_t stage_seed(std::uint64_t sample_seed, DistortionKind kind) {
  return split_seed(sample_seed, 1000 + static_cast<std::uint64_t>(kind));
}

namespace {

double draw_real(Rng& rng, Range r) {
  if (r.hi <= r.lo) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

int draw_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

PipelineSpec sample_div2k_pipeline(Severity severity, std::uint64_t sample_seed) {
  const SeverityRanges r = severity_ranges(severity);
  Rng rng(split_seed(sample_seed, 1));
  PipelineSpec p;
  p.severity = severity;
  const double blur = draw_real(rng, r.blur_sigma);
  const double noise = draw_real(rng, r.noise_sigma);
  const int q = draw_int(rng, r.quality_lo, r.quality_hi);
  p.stages.push_back({DistortionKind::gaussian_blur, blur, stage_seed(sample_seed, DistortionKind::gaussian_blur)});
  p.stages.push_back({DistortionKind::gaussian_noise, noise, stage_seed(sample_seed, DistortionKind::gaussian_noise)});
  p.stages.push_back({DistortionKind::jpeg, static_cast<double>(q), stage_seed(sample_seed, DistortionKind::jpeg)});
  return p;
}

PipelineSpec sample_mixed_pipeline(const MixedRanges& ranges, std::uint64_t sample_seed) {
  Rng rng(split_seed(sample_seed, 1));
  // Bit 0 noise, bit 1 jpeg, bit 2 motion; 1..7 are the nonempty subsets.
  const int subset = draw_int(rng, 1, 7);
  const double len = draw_real(rng, ranges.trajectory_len);
  const double noise = draw_real(rng, ranges.noise_sigma);
  const int q = draw_int(rng, static_cast<int>(std::ceil(ranges.jpeg_quality.lo)),
                         static_cast<int>(std::floor(ranges.jpeg_quality.hi)));
  PipelineSpec p;
  p.severity = Severity::unclassed;
  if (subset & 4) {
    p.stages.push_back({DistortionKind::motion_blur, len, stage_seed(sample_seed, DistortionKind::motion_blur)});
  }
  if (subset & 1) {
    p.stages.push_back({DistortionKind::gaussian_noise, noise, stage_seed(sample_seed, DistortionKind::gaussian_noise)});
  }
  if (subset & 2) {
    p.stages.push_back({DistortionKind::jpeg, static_cast<double>(q), stage_seed(sample_seed, DistortionKind::jpeg)});
  }
  return p;
}

PatchSample synth_div2k_style(const Image& img, Severity severity, Rng& rng) {
  PatchSample s;
  s.clean = clamp01(img);
  s.pipeline = sample_div2k_pipeline(severity, rng());
  s.distorted = apply_pipeline(s.clean, s.pipeline);
  return s;
}

PatchSample synth_mixed(const Image& img, Rng& rng, const MixedRanges& ranges) {
  PatchSample s;
  s.clean = clamp01(img);
  s.pipeline = sample_mixed_pipeline(ranges, rng());
  s.distorted = apply_pipeline(s.clean, s.pipeline);
  return s;
}

std::vector<CropOrigin> crop_patches(const Image& img, std::size_t size, std::size_t n, Rng& rng) {
  if (size == 0) throw DomainError("patch size must be positive");
  if (img.height < size || img.width < size) {
    throw DomainError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      " is smaller than the patch size " + std::to_string(size));
  }
  std::uniform_int_distribution<std::size_t> ys(0, img.height - size), xs(0, img.width - size);
  std::vector<CropOrigin> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = ys(rng);
    const std::size_t x = xs(rng);
    out.push_back({x, y});
  }
  return out;
}

}  // namespace owan::synth
