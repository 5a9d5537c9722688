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
#include <random>

namespace owan {

/// The generator used for every random draw in the project.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer: a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of child stream `index` of `parent`. Children of one parent are
/// decorrelated from each other and from the parent, so per-sample work can
/// run in any order (or in parallel) and draw identical numbers.
///
///   split_seed(p, i) = mix64(mix64(p) + (i + 1) * 0x9E3779B97F4A7C15)
std::uint64_t split_seed(std::uint64_t parent, std::uint64_t index);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace owan
