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
#include <string>
#include <vector>

#include "owan/image.hpp"

namespace owan::metrics {

/// Returned for identical images.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) over every sample of every channel, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);

/// BT.601 luma; gray images pass through.
Image luma(const Image& img);

/// Single-scale SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1 0.01,
/// K2 0.03, dynamic range 1, averaged over window positions fully inside
/// the image.
double ssim(const Image& a, const Image& b);

struct SampleMetrics {
  std::string filename;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::string status = "ok";  // or a reason the pair was not evaluated
};

struct EvalReport {
  std::vector<SampleMetrics> samples;  // sorted by filename
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::size_t count = 0;  // pairs that entered the means
};

/// Pairs files by name across both directories. Files present on only one
/// side, or failing to load, become error rows excluded from the means.
EvalReport evaluate_pairs(const std::filesystem::path& dir_restored, const std::filesystem::path& dir_reference);

/// CSV: filename, psnr_db, ssim, status, then a trailing "__mean__" row.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace owan::metrics
