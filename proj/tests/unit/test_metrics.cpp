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
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/oracles.hpp"
#include "owan/metrics.hpp"

using namespace owan;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Image shifted(Image img, double d) {
  for (auto& v : img.pixels) v += d;
  return img;
}

}  // namespace

TEST_CASE("PSNR") {
  auto a = oracle::random_image(16, 16, 3, 1);
  CHECK(metrics::psnr(a, a) == metrics::kPsnrCap);
  auto c = Image(10, 10, 3, 0.5);
  CHECK(metrics::psnr(c, shifted(c, 1.0 / 255.0)) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
  CHECK(metrics::psnr(c, shifted(c, 0.1)) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS(metrics::psnr(a, Image(16, 15, 3)));

  // Nested noise: the same draws scaled by a larger sigma never raise PSNR.
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> z(a.pixels.size());
  for (auto& v : z) v = n(rng);
  double last = metrics::kPsnrCap + 1;
  for (double s : {0.001, 0.01, 0.03, 0.1, 0.2}) {
    Image b = a;
    for (std::size_t i = 0; i < z.size(); ++i) b.pixels[i] += s * z[i];
    const double p = metrics::psnr(a, b);
    CHECK(p < last);
    CHECK(p > 0.0);
    last = p;
  }
}

TEST_CASE("SSIM") {
  auto x = oracle::scene(24, 30, 3);
  auto y = oracle::random_image(24, 30, 3, 4);
  CHECK(metrics::ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(metrics::ssim(x, y) == doctest::Approx(metrics::ssim(y, x)).epsilon(1e-12));
  const double s = metrics::ssim(x, y);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);
  CHECK(s < 0.99);
  CHECK(std::abs(metrics::ssim(x, y) - oracle::ssim(x, y)) <= 1e-10);
  auto z = oracle::scene(24, 30, 9);
  CHECK(std::abs(metrics::ssim(x, z) - oracle::ssim(x, z)) <= 1e-10);

  // Constant patches: variances vanish, so SSIM = (2 m1 m2 + C1) / (m1^2 + m2^2 + C1).
  const double c1 = 0.01 * 0.01;
  auto ca = Image(16, 16, 3, 0.5), cb = Image(16, 16, 3, 0.6);
  CHECK(metrics::ssim(ca, cb) == doctest::Approx((2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1)).epsilon(1e-12));

  CHECK_THROWS_AS(metrics::ssim(Image(10, 40, 3), Image(10, 40, 3)), DomainError);
  CHECK_NOTHROW(metrics::ssim(Image(11, 11, 3), Image(11, 11, 3)));
}

TEST_CASE("metrics are invariant to flipping both images") {
  auto x = oracle::scene(20, 26, 5);
  auto y = oracle::random_image(20, 26, 3, 6);
  CHECK(metrics::psnr(flip_horizontal(x), flip_horizontal(y)) == doctest::Approx(metrics::psnr(x, y)).epsilon(1e-12));
  CHECK(metrics::ssim(flip_horizontal(x), flip_horizontal(y)) == doctest::Approx(metrics::ssim(x, y)).epsilon(1e-10));
}

TEST_CASE("luma") {
  Image img(1, 1, 3);
  img.pixels = {1.0, 0.0, 0.0};
  CHECK(metrics::luma(img).pixels[0] == doctest::Approx(0.299));
  img.pixels = {0.2, 0.2, 0.2};
  CHECK(metrics::luma(img).pixels[0] == doctest::Approx(0.2));
  Image g(2, 2, 1, 0.3);
  CHECK(metrics::luma(g).pixels == g.pixels);
}

TEST_CASE("evaluate_pairs and the CSV report") {
  const fs::path root = oracle::temp_dir("metrics");
  fs::create_directories(root / "ref");
  fs::create_directories(root / "out");
  for (int i = 0; i < 4; ++i) {
    auto img = oracle::scene(16, 16, i);
    write_png(root / "ref" / ("img" + std::to_string(i) + ".png"), img);
    write_png(root / "out" / ("img" + std::to_string(i) + ".png"), img);
  }
  auto same = metrics::evaluate_pairs(root / "out", root / "ref");
  CHECK(same.count == 4);
  CHECK(same.mean_psnr == metrics::kPsnrCap);
  CHECK(same.mean_ssim == doctest::Approx(1.0).epsilon(1e-9));

  write_png(root / "out" / "img1.png", oracle::random_image(16, 16, 3, 7));
  fs::remove(root / "out" / "img3.png");
  std::ofstream(root / "out" / "img2.png") << "not a png";
  auto rep = metrics::evaluate_pairs(root / "out", root / "ref");
  REQUIRE(rep.samples.size() == 4);
  CHECK(rep.count == 2);
  CHECK(rep.samples[0].filename == "img0.png");
  CHECK(rep.samples[1].status == "ok");
  CHECK(rep.samples[2].status != "ok");
  CHECK(rep.samples[3].status == "missing_restored");
  CHECK(rep.mean_psnr == doctest::Approx((rep.samples[0].psnr_db + rep.samples[1].psnr_db) / 2.0));
  CHECK(rep.mean_ssim == doctest::Approx((rep.samples[0].ssim + rep.samples[1].ssim) / 2.0));

  metrics::write_report_csv(root / "a.csv", rep);
  metrics::write_report_csv(root / "b.csv", metrics::evaluate_pairs(root / "out", root / "ref"));
  const auto text = slurp(root / "a.csv");
  CHECK(text == slurp(root / "b.csv"));
  CHECK(text.rfind("filename,psnr_db,ssim,status\n", 0) == 0);
  CHECK(text.find("__mean__") != std::string::npos);
  CHECK(text.find("n=2") != std::string::npos);
  fs::remove_all(root);
}
