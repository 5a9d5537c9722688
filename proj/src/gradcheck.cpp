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
#include "owan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace owan {

GradcheckReport gradcheck(const std::function<Tensor<double>(Tape<double>&)>& program,
                          const std::vector<NamedTensor>& inputs, const GradcheckOptions& options) {
  GradcheckReport report;
  auto evaluate = [&program]() {
    Tape<double> quiet(false);
    return program(quiet).item();
  };

  std::vector<Tensor<double>> leaves;
  for (const auto& [name, t] : inputs) {
    Tensor<double> leaf = t;
    leaf.set_requires_grad(true);
    leaf.drop_grad();
    leaves.push_back(leaf);
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    Tensor<double> loss = program(tape);
    tape.backward(loss);
    for (auto& leaf : leaves) {
      if (leaf.has_grad()) {
        auto g = leaf.grad();
        analytic.emplace_back(g.begin(), g.end());
      } else {
        analytic.emplace_back(leaf.numel(), 0.0);
      }
    }
  }

  for (std::size_t k = 0; k < leaves.size(); ++k) {
    auto values = leaves[k].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double plus = evaluate();
      values[i] = saved - options.step;
      const double minus = evaluate();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      double err = std::abs(a - numeric) / denom;
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      ++report.checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_input = inputs[k].first;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error <= options.tolerance && std::isfinite(report.max_relative_error);
  for (auto& leaf : leaves) leaf.drop_grad();
  return report;
}

}  // namespace owan
