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
#include "owan/tape.hpp"

namespace owan {

template <typename T>
void Tape<T>::record(std::vector<Tensor<T>> inputs, Tensor<T> output, Rule rule) {
  if (!recording_) return;
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(rule)});
}

template <typename T>
void Tape<T>::backward(Tensor<T> loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
  }
  for (auto& node : nodes_) node.output.drop_grad();
  loss.grad_buffer()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->rule();
    // every consumer of this output has already run
    it->output.drop_grad();
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace owan
