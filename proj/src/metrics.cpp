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
#include "owan/metrics.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "owan/text_util.hpp"

namespace owan::metrics {

namespace {

void require_same_shape(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("metric inputs must share one shape");
}

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;

std::array<double, kWindow> window_1d() {
  std::array<double, kWindow> w{};
  double s = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    w[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

// Valid-region separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& p, std::size_t h, std::size_t w,
                                 const std::array<double, kWindow>& k) {
  const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < kWindow; ++j) s += k[j] * p[y * w + x + j];
      rows[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < kWindow; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b);
  if (a.empty()) throw ShapeError("PSNR of empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    se += d * d;
  }
  if (se == 0.0) return kPsnrCap;
  const double mse = se / static_cast<double>(a.pixels.size());
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

Image luma(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ShapeError("luma needs 1 or 3 channels");
  Image out(img.height, img.width, 1);
  for (std::size_t p = 0; p < img.height * img.width; ++p) {
    const double* px = &img.pixels[p * 3];
    out.pixels[p] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b);
  if (a.height < kWindow || a.width < kWindow) throw DomainError("SSIM needs images of at least 11x11");
  const Image ya = luma(a), yb = luma(b);
  const std::size_t h = a.height, w = a.width, n = h * w;
  const auto& x = ya.pixels;
  const auto& y = yb.pixels;
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = window_1d();
  const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
  const auto sxx = filter_valid(xx, h, w, k), syy = filter_valid(yy, h, w, k), sxy = filter_valid(xy, h, w, k);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

EvalReport evaluate_pairs(const std::filesystem::path& dir_restored, const std::filesystem::path& dir_reference) {
  std::map<std::string, int> sides;  // bit 0 restored, bit 1 reference
  for (const auto& p : list_png_files(dir_restored)) sides[p.filename().string()] |= 1;
  for (const auto& p : list_png_files(dir_reference)) sides[p.filename().string()] |= 2;
  EvalReport report;
  double sum_psnr = 0.0, sum_ssim = 0.0;
  for (const auto& [name, mask] : sides) {
    SampleMetrics m;
    m.filename = name;
    if (mask == 1) {
      m.status = "missing_reference";
    } else if (mask == 2) {
      m.status = "missing_restored";
    } else {
      try {
        const Image r = read_png(dir_restored / name), ref = read_png(dir_reference / name);
        m.psnr_db = psnr(r, ref);
        m.ssim = ssim(r, ref);
      } catch (const std::exception& e) {
        m.status = "error";
      }
    }
    if (m.status == "ok") {
      sum_psnr += m.psnr_db;
      sum_ssim += m.ssim;
      ++report.count;
    }
    report.samples.push_back(std::move(m));
  }
  if (report.count > 0) {
    report.mean_psnr = sum_psnr / static_cast<double>(report.count);
    report.mean_ssim = sum_ssim / static_cast<double>(report.count);
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write report " + path.string());
  os << "filename,psnr_db,ssim,status\n";
  for (const auto& s : report.samples) {
    if (s.status == "ok") {
      os << s.filename << ',' << format_real(s.psnr_db) << ',' << format_real(s.ssim) << ",ok\n";
    } else {
      os << s.filename << ",,," << s.status << '\n';
    }
  }
  os << "__mean__," << format_real(report.mean_psnr) << ',' << format_real(report.mean_ssim) << ",n="
     << report.count << '\n';
  if (!os) throw std::runtime_error("failed writing report " + path.string());
}

}  // namespace owan::metrics
