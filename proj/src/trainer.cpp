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
#include "owan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>

#include "owan/metrics.hpp"
#include "owan/ops.hpp"
#include "owan/rng.hpp"
#include "owan/text_util.hpp"

namespace owan::train {

double cosine_lr(double step, const ScheduleConfig& schedule) {
  if (schedule.total_steps == 0) throw ConfigError("schedule needs at least one step");
  const double total = static_cast<double>(schedule.total_steps);
  const double t = std::clamp(step, 0.0, total);
  return schedule.eta_min +
         0.5 * (schedule.eta_max - schedule.eta_min) * (1.0 + std::cos(std::numbers::pi * t / total));
}

template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr, const AdamConfig& config,
               const std::vector<std::string>* names) {
  std::vector<std::string> all;
  if (!names) {
    for (const auto& [name, t] : params) all.push_back(name);
    names = &all;
  }
  for (const auto& name : *names) {
    if (!params.at(name).has_grad()) throw std::logic_error("parameter '" + name + "' has no gradient");
  }
  state.t += 1;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (const auto& name : *names) {
    auto& p = params.at(name);
    auto theta = p.values();
    auto g = p.grad();
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != theta.size()) m.assign(theta.size(), T(0));
    if (v.size() != theta.size()) v.assign(theta.size(), T(0));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / c1, vhat = vi / c2;
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) - lr * mhat / (std::sqrt(vhat) + config.eps));
    }
  }
}

template <typename T>
std::vector<std::string> trainable_names(const OWANParams<T>& params, std::uint64_t step) {
  const auto mode = params.config.attention_mode;
  std::vector<std::string> out;
  for (const auto& [name, t] : params.store) {
    const bool is_attention = name.rfind("attention.", 0) == 0;
    const bool is_logits = name == "fixed_logits";
    bool use = false;
    switch (mode) {
      case AttentionMode::learned: use = !is_logits; break;
      case AttentionMode::none: use = !is_logits && !is_attention; break;
      case AttentionMode::fixed: use = step % 2 == 0 ? (!is_logits && !is_attention) : is_logits; break;
    }
    if (use) out.push_back(name);
  }
  // A fixed-mode network without layers has no logits to train on odd steps.
  if (out.empty() && mode == AttentionMode::fixed) return trainable_names(params, 0);
  return out;
}

template void adam_step<float>(ParamStore<float>&, AdamState<float>&, double, const AdamConfig&,
                               const std::vector<std::string>*);
template void adam_step<double>(ParamStore<double>&, AdamState<double>&, double, const AdamConfig&,
                                const std::vector<std::string>*);
template std::vector<std::string> trainable_names<float>(const OWANParams<float>&, std::uint64_t);
template std::vector<std::string> trainable_names<double>(const OWANParams<double>&, std::uint64_t);

void TrainConfig::validate() const {
  model.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(eta_max >= 0.0) || !(eta_min >= 0.0) || eta_min > eta_max) {
    throw ConfigError("learning rates must satisfy 0 <= eta_min <= eta_max");
  }
}

TrainConfig train_config_from_entries(const std::vector<KeyValue>& entries, const std::filesystem::path& base_dir) {
  TrainConfig c;
  auto resolve = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  for (const auto& kv : entries) {
    try {
      if (apply_model_key(c.model, kv.key, kv.value)) continue;
      if (kv.key == "epochs") c.epochs = parse_uint(kv.value);
      else if (kv.key == "batch_size") c.batch_size = parse_uint(kv.value);
      else if (kv.key == "seed") c.seed = parse_uint(kv.value);
      else if (kv.key == "checkpoint_every") c.checkpoint_every = parse_uint(kv.value);
      else if (kv.key == "train_data") c.train_data = resolve(kv.value);
      else if (kv.key == "output_dir") c.output_dir = resolve(kv.value);
      else if (kv.key == "eta_max") c.eta_max = parse_real(kv.value);
      else if (kv.key == "eta_min") c.eta_min = parse_real(kv.value);
      else if (kv.key == "augment") c.augment = parse_bool(kv.value);
      else throw ConfigError("unknown key '" + kv.key + "'");
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(kv.line) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_config_from_entries(read_key_value_file(path), path.parent_path());
}

std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& config) {
  auto e = model_entries(config.model);
  e.emplace_back("epochs", std::to_string(config.epochs));
  e.emplace_back("batch_size", std::to_string(config.batch_size));
  e.emplace_back("seed", std::to_string(config.seed));
  e.emplace_back("checkpoint_every", std::to_string(config.checkpoint_every));
  e.emplace_back("train_data", config.train_data.string());
  e.emplace_back("output_dir", config.output_dir.string());
  e.emplace_back("eta_max", format_real(config.eta_max));
  e.emplace_back("eta_min", format_real(config.eta_min));
  e.emplace_back("augment", config.augment ? "true" : "false");
  return e;
}

std::string format_train_config(const TrainConfig& config) { return format_key_values(train_config_entries(config)); }

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kAugmentStream = 2;

// Samples as planar C x H x W float arrays, ready to be copied into batches.
struct PlanarSet {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<std::vector<float>> input, target;
};

std::vector<float> planar(const Image& im) {
  std::vector<float> out(im.pixels.size());
  const std::size_t hw = im.height * im.width;
  for (std::size_t ch = 0; ch < im.channels; ++ch)
    for (std::size_t p = 0; p < hw; ++p) out[ch * hw + p] = static_cast<float>(im.pixels[p * im.channels + ch]);
  return out;
}

PlanarSet to_planar(const synth::PairedDataset& data, std::size_t in_channels) {
  if (data.size() == 0) throw ConfigError("training set is empty");
  PlanarSet s;
  const Image& first = data.clean.front();
  s.c = first.channels;
  s.h = first.height;
  s.w = first.width;
  if (s.c != in_channels) {
    throw ConfigError("dataset has " + std::to_string(s.c) + " channels, model expects " + std::to_string(in_channels));
  }
  if (s.h < 7 || s.w < 7) throw ConfigError("training patches must be at least 7x7");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.clean[i].same_shape(first) || !data.distorted[i].same_shape(first)) {
      throw ShapeError("all training patches must share one size; " + data.ids[i] + " differs");
    }
    s.input.push_back(planar(data.distorted[i]));
    s.target.push_back(planar(data.clean[i]));
  }
  return s;
}

void copy_sample(const std::vector<float>& src, float* dst, std::size_t c, std::size_t h, std::size_t w, bool flip) {
  if (!flip) {
    std::copy(src.begin(), src.end(), dst);
    return;
  }
  for (std::size_t r = 0; r < c * h; ++r)
    for (std::size_t x = 0; x < w; ++x) dst[r * w + x] = src[r * w + (w - 1 - x)];
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(split_seed(split_seed(seed, kShuffleStream), epoch));
  // Fisher-Yates with an explicit draw so the permutation does not depend
  // on the standard library's shuffle.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::string checkpoint_name(std::uint64_t step) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint-%08llu.ckpt", static_cast<unsigned long long>(step));
  return buf;
}

std::string loss_row_text(const LossRow& r) {
  return std::to_string(r.step) + "," + format_real(r.lr) + "," + format_real(r.loss) + "," + format_real(r.mae) + "\n";
}

constexpr const char* kLossHeader = "step,lr,loss,mae\n";

}  // namespace

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRow>& rows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write loss log " + path.string());
  os << kLossHeader;
  for (const auto& r : rows) os << loss_row_text(r);
}

std::vector<LossRow> read_loss_log(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read loss log " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<LossRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ConfigError("malformed loss log row in " + path.string());
    rows.push_back({parse_uint(f[0]), parse_real(f[1]), parse_real(f[2]), parse_real(f[3])});
  }
  return rows;
}

TrainResult train(const TrainConfig& config, const synth::PairedDataset& data, std::ostream& log,
                  const Checkpoint* resume, const StepCallback& on_step) {
  config.validate();
  const PlanarSet set = to_planar(data, config.model.in_channels);
  const std::size_t n = set.input.size();
  const std::size_t per_sample = set.c * set.h * set.w;
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::uint64_t total = static_cast<std::uint64_t>(config.epochs) * batches_per_epoch;
  const ScheduleConfig schedule{config.eta_max, config.eta_min, std::max<std::size_t>(1, total)};
  const std::string config_text = format_train_config(config);
  const bool to_disk = !config.output_dir.empty();

  OWANParams<float> params;
  AdamState<float> adam;
  std::uint64_t start = 0;
  std::vector<LossRow> rows;
  if (resume) {
    if (!(resume->model == config.model)) throw ConfigError("resume checkpoint was trained with another model config");
    if (resume->seed != config.seed) throw ConfigError("resume checkpoint was trained with another seed");
    if (resume->step > total) throw ConfigError("resume checkpoint is past the end of this run");
    params = params_from_checkpoint<float>(*resume);
    adam = adam_from_checkpoint<float>(*resume);
    start = resume->step;
  } else {
    params = build_network<float>(config.model, split_seed(config.seed, kInitStream));
  }

  std::ofstream loss_out;
  if (to_disk) {
    std::filesystem::create_directories(config.output_dir);
    const auto loss_path = config.output_dir / "loss.csv";
    if (resume && std::filesystem::exists(loss_path)) {
      for (const auto& r : read_loss_log(loss_path)) {
        if (r.step <= start) rows.push_back(r);
      }
    }
    write_loss_log(loss_path, rows);
    loss_out.open(loss_path, std::ios::binary | std::ios::app);
  }

  log << "training " << n << " samples, " << batches_per_epoch << " batches/epoch, " << total << " steps";
  if (start) log << ", resuming at step " << start;
  log << '\n';

  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::size_t> order;
  bool stopped = false;
  for (std::uint64_t step = start; step < total; ++step) {
    const std::uint64_t epoch = step / batches_per_epoch;
    const std::size_t b = static_cast<std::size_t>(step % batches_per_epoch);
    if (epoch != cached_epoch) {
      order = epoch_order(config.seed, epoch, n);
      cached_epoch = epoch;
    }
    const std::size_t lo = b * config.batch_size, hi = std::min(n, lo + config.batch_size);
    const std::size_t bs = hi - lo;
    auto input = Tensor<float>::uninitialized({bs, set.c, set.h, set.w});
    auto target = Tensor<float>::uninitialized({bs, set.c, set.h, set.w});
    Rng aug(split_seed(split_seed(config.seed, kAugmentStream), step));
    for (std::size_t i = 0; i < bs; ++i) {
      const bool flip = config.augment && (aug() & 1);
      const std::size_t idx = order[lo + i];
      copy_sample(set.input[idx], input.values().data() + i * per_sample, set.c, set.h, set.w, flip);
      copy_sample(set.target[idx], target.values().data() + i * per_sample, set.c, set.h, set.w, flip);
    }

    params.store.zero_grad();
    Tape<float> tape;
    const auto result = network_forward(tape, params, input);
    const auto loss = l1_loss(tape, result.output, target);
    const double loss_value = static_cast<double>(loss.item());
    const double lr = cosine_lr(static_cast<double>(step), schedule);
    LossRow row{step + 1, lr, loss_value, loss_value / static_cast<double>(per_sample)};

    if (!std::isfinite(loss_value)) {
      if (to_disk) {
        save_checkpoint(config.output_dir / "diverged.ckpt",
                        make_checkpoint(params, &adam, config_text, config.seed, step));
      }
      throw TrainingDiverged("non-finite loss at step " + std::to_string(step + 1));
    }
    tape.backward(loss);
    tape.clear();
    const auto names = trainable_names(params, step);
    adam_step(params.store, adam, lr, AdamConfig{}, &names);
    params.store.zero_grad();

    rows.push_back(row);
    if (to_disk) {
      loss_out << loss_row_text(row);
      loss_out.flush();
      if (config.checkpoint_every && row.step % config.checkpoint_every == 0) {
        save_checkpoint(config.output_dir / checkpoint_name(row.step),
                        make_checkpoint(params, &adam, config_text, config.seed, row.step));
      }
    }
    if (on_step && !on_step(row, params)) {
      stopped = true;
      break;
    }
  }

  TrainResult out;
  const std::uint64_t done = rows.empty() ? start : std::max(start, rows.back().step);
  out.checkpoint = make_checkpoint(params, &adam, config_text, config.seed, done);
  out.log = std::move(rows);
  if (to_disk && !stopped) save_checkpoint(config.output_dir / "final.ckpt", out.checkpoint);
  return out;
}

TrainResult train(const TrainConfig& config, std::ostream& log, const Checkpoint* resume) {
  if (config.train_data.empty()) throw ConfigError("train_data is not set");
  const auto data = synth::load_paired_dataset(config.train_data);
  return train(config, data, log, resume);
}

DatasetScore evaluate_dataset(const OWANParams<float>& params, const synth::PairedDataset& data) {
  if (data.size() == 0) throw ConfigError("evaluation set is empty");
  DatasetScore s;
  Tape<float> tape(false);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto input = images_to_tensor<float>({&data.distorted[i]});
    const auto result = network_forward(tape, params, input);
    Image restored = tensor_to_image(result.output, 0);
    double err = 0.0;
    for (std::size_t k = 0; k < restored.pixels.size(); ++k) err += std::abs(restored.pixels[k] - data.clean[i].pixels[k]);
    s.mae += err / static_cast<double>(restored.pixels.size());
    s.psnr_restored += metrics::psnr(clamp01(restored), data.clean[i]);
    s.psnr_input += metrics::psnr(data.distorted[i], data.clean[i]);
  }
  const double k = static_cast<double>(data.size());
  s.mae /= k;
  s.psnr_restored /= k;
  s.psnr_input /= k;
  return s;
}

}  // namespace owan::train
