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
#include "owan/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace owan {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  impl_->data.assign(shape_numel(shape), T(0));
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " + shape_string(shape));
  }
  impl_->data.assign(values.begin(), values.end());
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::uninitialized(Shape shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->data.resize(shape_numel(shape));
  t.impl_->shape = std::move(shape);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
typename Tensor<T>::Impl& Tensor<T>::impl() const {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return impl().shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const auto& s = impl().shape;
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return impl().data.size();
}

template <typename T>
std::span<T> Tensor<T>::values() {
  return impl().data;
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
  return impl().data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_string(shape()));
  return impl().data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return impl().requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  impl().requires_grad = flag;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return !impl().grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient");
  return impl().grad;
}

template <typename T>
std::span<T> Tensor<T>::grad_buffer() const {
  auto& im = impl();
  if (im.grad.empty()) im.grad.assign(im.data.size(), T(0));
  return im.grad;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  auto& g = impl().grad;
  std::fill(g.begin(), g.end(), T(0));
}

template <typename T>
void Tensor<T>::drop_grad() const {
  auto& g = impl().grad;
  g.clear();
  g.shrink_to_fit();
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = impl().shape;
  t.impl_->data = impl().data;
  return t;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace owan
