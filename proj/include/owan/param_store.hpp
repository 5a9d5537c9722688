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

#include <map>
#include <string>

#include "owan/tensor.hpp"

namespace owan {

/// Named learnable tensors. Iteration is lexicographic by name.
template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  /// Registers a tensor (marking it as requiring gradients) and returns the
  /// shared handle.
  Tensor<T> add(const std::string& name, Tensor<T> tensor) {
    tensor.set_requires_grad(true);
    auto [it, inserted] = params_.emplace(name, std::move(tensor));
    if (!inserted) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  const Tensor<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
  }
  Tensor<T>& at(const std::string& name) {
    return const_cast<Tensor<T>&>(static_cast<const ParamStore&>(*this).at(name));
  }

  std::size_t size() const { return params_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : params_) t.drop_grad();
  }

  typename Map::const_iterator begin() const { return params_.begin(); }
  typename Map::const_iterator end() const { return params_.end(); }
  typename Map::iterator begin() { return params_.begin(); }
  typename Map::iterator end() { return params_.end(); }

 private:
  Map params_;
};

}  // namespace owan
