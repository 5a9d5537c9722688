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
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "owan/checkpoint.hpp"
#include "owan/config_file.hpp"
#include "owan/dataset.hpp"
#include "owan/model.hpp"

namespace owan::train {

struct ScheduleConfig {
  double eta_max = 1e-3;
  double eta_min = 0.0;
  std::size_t total_steps = 1;
};

/// Single-cycle cosine annealing; steps outside [0, total_steps] clamp.
double cosine_lr(double step, const ScheduleConfig& schedule);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// One Adam update of the named parameters (all of them when `names` is
/// null). Every updated parameter must hold a gradient. The step counter
/// advances once per call; moments of parameters outside `names` are left
/// untouched.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, double lr, const AdamConfig& config = {},
               const std::vector<std::string>* names = nullptr);

/// Parameters optimized at global step `step`: everything reached by the
/// forward pass, except in fixed mode where even steps update the
/// convolutions and odd steps update the fixed logits.
template <typename T>
std::vector<std::string> trainable_names(const OWANParams<T>& params, std::uint64_t step);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  OWANConfig model;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::filesystem::path train_data;  // directory with clean/ and distorted/
  std::filesystem::path output_dir;  // empty: keep everything in memory
  double eta_max = 1e-3;
  double eta_min = 0.0;
  bool augment = false;              // random horizontal flips

  void validate() const;
};

/// Keys: the model keys plus epochs, batch_size, seed, checkpoint_every,
/// train_data, output_dir, eta_max, eta_min, augment. Unknown keys raise
/// ConfigError. Relative paths resolve against `base_dir`.
TrainConfig train_config_from_entries(const std::vector<KeyValue>& entries, const std::filesystem::path& base_dir = {});
TrainConfig load_train_config(const std::filesystem::path& path);
std::vector<std::pair<std::string, std::string>> train_config_entries(const TrainConfig& config);
std::string format_train_config(const TrainConfig& config);

struct LossRow {
  std::uint64_t step = 0;  // 1-based count of completed updates
  double lr = 0.0;
  double loss = 0.0;       // (1/N) sum_i |F(x_i) - y_i|_1
  double mae = 0.0;        // loss / elements per sample
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRow> log;
};

/// Observer called after every update; return false to stop early (the
/// run then ends without a final checkpoint file).
using StepCallback = std::function<bool(const LossRow&, const OWANParams<float>&)>;

/// Trains in single precision. With a non-empty output_dir, writes
/// loss.csv, checkpoint-<step>.ckpt every checkpoint_every steps and
/// final.ckpt; on a non-finite loss writes diverged.ckpt and throws
/// TrainingDiverged. `resume` continues a run bit-exactly from its step.
TrainResult train(const TrainConfig& config, const synth::PairedDataset& data, std::ostream& log,
                  const Checkpoint* resume = nullptr, const StepCallback& on_step = {});

/// Loads config.train_data and trains.
TrainResult train(const TrainConfig& config, std::ostream& log, const Checkpoint* resume = nullptr);

std::vector<LossRow> read_loss_log(const std::filesystem::path& path);
void write_loss_log(const std::filesystem::path& path, const std::vector<LossRow>& rows);

/// Mean per-element L1 and mean PSNR of the network over a dataset,
/// evaluated one sample at a time.
struct DatasetScore {
  double mae = 0.0;
  double psnr_restored = 0.0;
  double psnr_input = 0.0;
};

DatasetScore evaluate_dataset(const OWANParams<float>& params, const synth::PairedDataset& data);

}  // namespace owan::train
