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
#include <doctest.h>

#include "owan/ops.hpp"
#include "owan/param_store.hpp"
#include "owan/tape.hpp"
#include "owan/tensor.hpp"

using namespace owan;

TEST_CASE("tensor construction and shape checks") {
  Tensor<float> t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  for (float v : t.values()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(Tensor<float>({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor<double>({2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(t.dim(2), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK(Tensor<double>::scalar(2.5).item() == 2.5);
  CHECK(Tensor<double>::full({2, 2}, 7.0).values()[3] == 7.0);
  CHECK(shape_string({2, 3, 4}) == "[2x3x4]");
}

TEST_CASE("tensor handles share storage; clone does not") {
  Tensor<double> a({3}, {1, 2, 3});
  Tensor<double> b = a;
  b.values()[0] = 10;
  CHECK(a.values()[0] == 10);
  CHECK(a.is_same(b));
  Tensor<double> c = a.clone();
  c.values()[1] = -1;
  CHECK(a.values()[1] == 2);
  CHECK_FALSE(c.is_same(a));
  CHECK_FALSE(c.requires_grad());
}

TEST_CASE("undefined tensor use is an error") {
  Tensor<float> t;
  CHECK_FALSE(t.defined());
  CHECK_THROWS(t.numel());
}

TEST_CASE("tape backward seeds loss and accumulates leaf gradients") {
  Tensor<double> x({3}, {1, -2, 3}, true);
  for (int round = 0; round < 2; ++round) {
    Tape<double> tape;
    auto y = sum(tape, relu(tape, x));
    CHECK(y.item() == doctest::Approx(4.0));
    tape.backward(y);
  }
  auto g = x.grad();
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 2.0);
}

TEST_CASE("tape backward requires a scalar loss") {
  Tensor<double> x({3}, {1, 2, 3}, true);
  Tape<double> tape;
  auto y = relu(tape, x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("non-recording tape records nothing") {
  Tensor<double> x({3}, {1, 2, 3}, true);
  Tape<double> tape(false);
  auto y = sum(tape, relu(tape, x));
  CHECK(tape.size() == 0);
  CHECK(y.item() == 6.0);
}

TEST_CASE("shared subexpressions receive gradient from every use") {
  Tensor<double> x({2}, {1.5, -0.5}, true);
  Tape<double> tape;
  auto r = relu(tape, x);
  auto y = sum(tape, add(tape, r, r));
  tape.backward(y);
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("param store naming and duplicate detection") {
  ParamStore<float> s;
  s.add("b", Tensor<float>({2}));
  s.add("a", Tensor<float>({3}));
  CHECK(s.size() == 2);
  CHECK(s.scalar_count() == 5);
  CHECK(s.at("a").requires_grad());
  CHECK(s.begin()->first == "a");
  CHECK_THROWS_AS(s.add("a", Tensor<float>({1})), std::invalid_argument);
  CHECK_THROWS_AS(s.at("zzz"), std::out_of_range);
}

TEST_CASE("tensor_cast converts values") {
  Tensor<double> d({2}, {0.5, -1.25});
  auto f = tensor_cast<float>(d);
  CHECK(f.values()[1] == -1.25f);
}
