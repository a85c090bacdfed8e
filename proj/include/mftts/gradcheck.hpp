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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mftts/tensor.hpp"

namespace mftts {

struct GradEntry {
  std::string input;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradReport {
  std::string op;
  double max_rel_error = 0.0;
  std::vector<GradEntry> entries;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-4;
  // 0 checks every element; otherwise a seeded sample of this many per input.
  std::size_t max_entries_per_input = 0;
  std::uint64_t seed = 0;
  // Magnitudes below this are compared absolutely rather than relatively.
  double abs_floor = 1e-6;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

using NamedTensor = std::pair<std::string, Tensor<double>>;

// Compares backward() against central differences of `loss_fn`, which must
// rebuild its graph from the (leaf) `inputs` on every call.
GradReport check_gradients(std::string op,
                           const std::function<Tensor<double>()>& loss_fn,
                           std::vector<NamedTensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace mftts
