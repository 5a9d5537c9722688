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
// Python bindings. Images cross the boundary as float64 arrays of shape
// (H, W, C) with samples in [0, 1].
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <sstream>

#include "owan/analysis.hpp"
#include "owan/checkpoint.hpp"
#include "owan/dataset.hpp"
#include "owan/metrics.hpp"
#include "owan/restore.hpp"

namespace py = pybind11;
using namespace owan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
  Image img(a.shape(0), a.shape(1), a.ndim() == 3 ? a.shape(2) : 1);
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

Array to_array(const Image& img) {
  Array a({img.height, img.width, img.channels});
  std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
  return a;
}

// Layers x ops matrix of one image's attention weights.
Array attention_matrix(const std::vector<AttentionRecord>& records) {
  std::size_t layers = 0, ops = 0;
  for (const auto& r : records) {
    layers = std::max(layers, r.layer);
    ops = std::max(ops, r.op);
  }
  Array a({layers, ops});
  std::fill(a.mutable_data(), a.mutable_data() + a.size(), 0.0);
  for (const auto& r : records) a.mutable_data()[(r.layer - 1) * ops + (r.op - 1)] = r.weight;
  return a;
}

class Restorer {
 public:
  explicit Restorer(const std::filesystem::path& ckpt) : params_(params_from_checkpoint<float>(load_checkpoint(ckpt))) {}

  py::tuple restore(const Array& image, std::size_t max_tile, std::size_t overlap) const {
    std::vector<AttentionRecord> records;
    Image out;
    {
      py::gil_scoped_release release;
      out = restore_image(params_, to_image(image), {max_tile, overlap}, &records, "x");
    }
    return py::make_tuple(to_array(out), attention_matrix(records));
  }

  const OWANConfig& config() const { return params_.config; }

 private:
  OWANParams<float> params_;
};

}  // namespace

PYBIND11_MODULE(_owan, m) {
  m.doc() = "Operation-wise attention network for restoring images with combined distortions";

  py::register_exception<ImageIoError>(m, "ImageIoError", PyExc_OSError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);

  m.def("read_png", [](const std::filesystem::path& p) { return to_array(read_png(p)); }, py::arg("path"));
  m.def("write_png", [](const std::filesystem::path& p, const Array& a) { write_png(p, to_image(a)); },
        py::arg("path"), py::arg("image"));
  m.def("quantize_8bit", [](const Array& a) { return to_array(quantize_8bit(to_image(a))); }, py::arg("image"));

  m.def("psnr", [](const Array& a, const Array& b) { return metrics::psnr(to_image(a), to_image(b)); },
        py::arg("a"), py::arg("b"), "PSNR in dB for a peak of 1; 100 for identical images.");
  m.def("ssim", [](const Array& a, const Array& b) { return metrics::ssim(to_image(a), to_image(b)); },
        py::arg("a"), py::arg("b"));
  m.def("evaluate_pairs", [](const std::filesystem::path& restored, const std::filesystem::path& reference) {
    const auto r = metrics::evaluate_pairs(restored, reference);
    py::list samples;
    for (const auto& s : r.samples) {
      samples.append(py::dict(py::arg("filename") = s.filename, py::arg("psnr") = s.psnr_db,
                              py::arg("ssim") = s.ssim, py::arg("status") = s.status));
    }
    return py::dict(py::arg("samples") = samples, py::arg("mean_psnr") = r.mean_psnr,
                    py::arg("mean_ssim") = r.mean_ssim, py::arg("count") = r.count);
  }, py::arg("restored"), py::arg("reference"));

  m.def("gaussian_kernel", [](double sigma) {
    const auto k = synth::gaussian_kernel(sigma);
    Array a({k.size, k.size});
    std::copy(k.values.begin(), k.values.end(), a.mutable_data());
    return a;
  }, py::arg("sigma"));
  m.def("gaussian_blur", [](const Array& a, double sigma) {
    return to_array(synth::apply_gaussian_blur(to_image(a), sigma));
  }, py::arg("image"), py::arg("sigma"));
  m.def("gaussian_noise", [](const Array& a, double sigma_255, std::uint64_t seed) {
    Rng rng(seed);
    return to_array(synth::apply_gaussian_noise(to_image(a), sigma_255, rng));
  }, py::arg("image"), py::arg("sigma"), py::arg("seed"), "Additive noise; sigma on the 0-255 scale.");
  m.def("jpeg", [](const Array& a, int quality) { return to_array(synth::apply_jpeg(to_image(a), quality)); },
        py::arg("image"), py::arg("quality"));
  m.def("jpeg_quant_tables", [](int quality) {
    const auto t = synth::jpeg_quant_tables(quality);
    return py::make_tuple(t.luma, t.chroma);
  }, py::arg("quality"));
  m.def("motion_blur", [](const Array& a, double max_len, std::size_t kernel_size, std::uint64_t seed) {
    synth::TrajectoryParams tp;
    tp.max_len = max_len;
    Rng rng(seed);
    const auto psf = synth::trajectory_to_kernel(synth::generate_trajectory(tp, rng), kernel_size);
    return to_array(synth::apply_motion_blur(to_image(a), psf));
  }, py::arg("image"), py::arg("max_len"), py::arg("kernel_size"), py::arg("seed"));

  m.def("build_dataset", [](const std::filesystem::path& in, const std::filesystem::path& out,
                            const std::string& protocol, std::size_t count, std::size_t patch_size,
                            std::uint64_t seed) {
    synth::DatasetOptions o;
    o.protocol = synth::parse_protocol(protocol);
    o.patches_per_image = count;
    o.patch_size = patch_size;
    o.master_seed = seed;
    std::ostringstream log;
    return synth::build_dataset(in, out, o, log).size();
  }, py::arg("input_dir"), py::arg("output_dir"), py::arg("protocol"), py::arg("count"), py::arg("patch_size"),
     py::arg("seed"), "Writes clean/, distorted/ and manifest.csv; returns the number of samples.");

  py::class_<Restorer>(m, "Restorer")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def("restore", &Restorer::restore, py::arg("image"), py::arg("max_tile") = 256, py::arg("overlap") = 32,
           "Returns (restored image, layers x ops attention weights).")
      .def_property_readonly("layers", [](const Restorer& r) { return r.config().layers; })
      .def_property_readonly("operations", [](const Restorer& r) {
        std::vector<std::string> names;
        for (const auto& op : r.config().ops) names.push_back(op.name());
        return names;
      });

  m.def("attention_stats", [](const std::filesystem::path& csv) {
    const auto s = analysis::stats(read_attention_csv(csv));
    Array mean({s.layers, s.ops}), var({s.layers, s.ops});
    std::copy(s.mean.begin(), s.mean.end(), mean.mutable_data());
    std::copy(s.variance.begin(), s.variance.end(), var.mutable_data());
    return py::make_tuple(mean, var);
  }, py::arg("attention_csv"), "Per-(layer, op) mean and variance of the weights in an attention CSV.");
}
