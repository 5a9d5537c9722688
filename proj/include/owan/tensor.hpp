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

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace owan {

/// Raised when tensor shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for out-of-domain arguments (negative sigma, bad quality, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for invalid model or training configurations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

/// Allocator whose value-initialization is a no-op, so buffers that are
/// about to be overwritten skip the zero fill.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor with an optional gradient slot.
///
/// A Tensor is a handle: copies alias the same storage, which is what lets
/// the tape route gradients back to parameters. Use clone() for a deep copy.
/// Feature maps use N x C x H x W order.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor full(Shape shape, T value, bool requires_grad = false);
  /// Tensor with unspecified contents, for results that are fully written.
  static Tensor uninitialized(Shape shape);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<T> values();
  std::span<const T> values() const;
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const T> grad() const;
  /// Gradient slot, allocated as zeros on first access. The gradient is
  /// bookkeeping attached to the handle, so it is writable through const.
  std::span<T> grad_buffer() const;
  void zero_grad() const;
  void drop_grad() const;

  /// Deep copy of the values; the copy is a fresh leaf with no gradient.
  Tensor clone() const;
  bool is_same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  using Buffer = std::vector<T, DefaultInitAllocator<T>>;
  struct Impl {
    Shape shape;
    Buffer data;
    Buffer grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  Impl& impl() const;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

/// Converts between precisions; the result is a detached leaf.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& source) {
  std::vector<To> out(source.numel());
  auto in = source.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(in[i]);
  return Tensor<To>(source.shape(), std::move(out));
}

}  // namespace owan
