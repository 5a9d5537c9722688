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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "owan/model.hpp"

namespace owan {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'O', 'W', 'A', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const StoredTensor&) const = default;
};

/// Adam moments per parameter name plus the shared step counter.
template <typename T>
struct AdamState {
  std::uint64_t t = 0;
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
};

/// Everything needed to restore a network or continue a run.
///
/// Layout (all integers little-endian):
///   "OWANCKPT" u32 version
///   u64 seed, u64 step, u64 adam_t
///   u64 length + bytes: key = value text of the run configuration
///   u64 tensor count, then per tensor: u64 name length + name,
///       u64 rank, rank x u64 dims, numel x f32
///   u8 has_moments; if 1, per parameter (same order): m values, v values
///   "OWANEND!"
/// The shuffling and augmentation streams are pure functions of
/// (seed, step), so no generator state is stored beyond those two numbers.
struct Checkpoint {
  std::string config_text;
  OWANConfig model;  // parsed from config_text
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t adam_t = 0;
  std::vector<StoredTensor> params;  // sorted by name
  bool has_moments = false;
  std::vector<StoredTensor> adam_m;
  std::vector<StoredTensor> adam_v;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);

/// Parses the whole buffer before returning; any defect raises
/// CheckpointError and nothing is handed back.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Model configuration carried by key = value text (other keys ignored).
OWANConfig model_from_config_text(const std::string& text);

template <typename T>
Checkpoint make_checkpoint(const OWANParams<T>& params, const AdamState<T>* adam, const std::string& config_text,
                           std::uint64_t seed, std::uint64_t step);

/// Rebuilds a parameter set; names and shapes must match the model config.
template <typename T>
OWANParams<T> params_from_checkpoint(const Checkpoint& ckpt);

template <typename T>
AdamState<T> adam_from_checkpoint(const Checkpoint& ckpt);

}  // namespace owan
