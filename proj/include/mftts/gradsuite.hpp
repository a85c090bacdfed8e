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

// The finite-difference suite behind `mftts gradcheck`: every
// differentiable primitive, the composite blocks and the full desk model,
// all in double precision.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mftts/gradcheck.hpp"

namespace mftts {

inline constexpr double kPrimitiveTolerance = 1e-4;
inline constexpr double kModelTolerance = 1e-3;

struct GradSuiteEntry {
  GradReport report;
  double tolerance = 0;
  bool full_model = false;

  bool passed() const { return report.passed(tolerance); }
};

// Runs every check; `on_entry` sees each result as it completes.
std::vector<GradSuiteEntry> run_gradient_suite(
    std::uint64_t seed = 0,
    const std::function<void(const GradSuiteEntry&)>& on_entry = {});

}  // namespace mftts
