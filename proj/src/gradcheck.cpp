// Copyright 2026 The mftts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mftts/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mftts/error.hpp"
#include "mftts/random.hpp"

namespace mftts {

double relative_error(double analytic, double numeric, double floor) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradReport check_gradients(std::string op,
                           const std::function<Tensor<double>()>& loss_fn,
                           std::vector<NamedTensor> inputs,
                           const GradCheckOptions& options) {
  for (auto& [name, t] : inputs) {
    if (!t.requires_grad()) {
      throw ContractError("gradcheck input '" + name +
                          "' does not require grad");
    }
    t.zero_grad();
  }
  loss_fn().backward();

  GradReport report;
  report.op = std::move(op);
  Rng rng(options.seed);
  for (auto& [name, t] : inputs) {
    const std::size_t n = t.size();
    std::vector<std::size_t> picks(n);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    if (options.max_entries_per_input && n > options.max_entries_per_input) {
      // partial Fisher-Yates
      for (std::size_t i = 0; i < options.max_entries_per_input; ++i) {
        std::swap(picks[i], picks[i + rng.below(n - i)]);
      }
      picks.resize(options.max_entries_per_input);
      std::sort(picks.begin(), picks.end());
    }
    const std::vector<double> analytic =
        t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                     : std::vector<double>(n, 0.0);
    auto data = t.mutable_data();
    for (std::size_t idx : picks) {
      const double saved = data[idx];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        data[idx] = saved + options.step;
        plus = loss_fn().item();
        data[idx] = saved - options.step;
        minus = loss_fn().item();
      }
      data[idx] = saved;
      GradEntry e;
      e.input = name;
      e.index = idx;
      e.analytic = analytic[idx];
      e.numeric = (plus - minus) / (2.0 * options.step);
      e.rel_error = relative_error(e.analytic, e.numeric, options.abs_floor);
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

}  // namespace mftts
