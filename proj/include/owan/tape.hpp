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

#include <functional>
#include <initializer_list>
#include <vector>

#include "owan/tensor.hpp"

namespace owan {

/// Define-by-run record of differentiable operations.
///
/// Nodes are appended in execution order, so the node list is topologically
/// sorted by construction and backward() is a single reverse sweep. A tape
/// belongs to one thread; build a fresh one per forward pass. A tape built
/// with recording disabled computes values only and retains nothing.
template <typename T>
class Tape {
 public:
  using Rule = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  /// True when an op over these inputs must be recorded.
  bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!recording_) return false;
    for (const auto* t : inputs) {
      if (t && t->defined() && t->requires_grad()) return true;
    }
    return false;
  }

  /// Appends a node. The rule reads output's gradient and accumulates into
  /// the gradients of those inputs that require them.
  void record(std::vector<Tensor<T>> inputs, Tensor<T> output, Rule rule);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Gradients of
  /// intermediate results are reset first; leaf gradients accumulate across
  /// calls until zeroed.
  void backward(Tensor<T> loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    Rule rule;
  };
  bool recording_;
  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace owan
