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
#include <string>
#include <utility>
#include <vector>

#include "owan/tape.hpp"
#include "owan/tensor.hpp"

namespace owan {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Lower bound on the relative-error denominator; gradients smaller than
  /// this are compared in absolute terms.
  double denominator_floor = 1e-3;
};

struct GradcheckReport {
  bool passed = true;
  double max_relative_error = 0.0;
  std::string worst_input;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

using NamedTensor = std::pair<std::string, Tensor<double>>;

/// Compares tape gradients of a scalar program against central finite
/// differences for every element of every input. Failures are reported,
/// never thrown. The program must rebuild its graph on the tape it is given.
GradcheckReport gradcheck(const std::function<Tensor<double>(Tape<double>&)>& program,
                          const std::vector<NamedTensor>& inputs, const GradcheckOptions& options = {});

}  // namespace owan
