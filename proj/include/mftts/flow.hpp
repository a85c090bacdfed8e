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

// Conditional flow matching on the straight noise-to-data path:
//   x_t = (1 - t) x0 + t x1,   u = x1 - x0,
//   loss = E ||v(x_t, t) - u||^2,
// and fixed-step ODE integration of a learned field from t = 0 to 1.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mftts/random.hpp"
#include "mftts/tensor.hpp"

namespace mftts {

// Endpoints are exact: t == 0 returns x0's values and t == 1 returns x1's.
template <typename T>
Tensor<T> interpolate_path(const Tensor<T>& x0, const Tensor<T>& x1, double t);

template <typename T>
Tensor<T> target_field(const Tensor<T>& x0, const Tensor<T>& x1);

// v for batch item `item` at state x_t and time t.
template <typename T>
using ItemField =
    std::function<Tensor<T>(std::size_t item, const Tensor<T>& x_t, double t)>;

// Mean over items of the per-item mean squared error. `x0s` and `ts` are
// given explicitly; use the overload below for sampled ones.
template <typename T>
Tensor<T> cfm_loss(const ItemField<T>& field, std::span<const Tensor<T>> x1s,
                   std::span<const Tensor<T>> x0s, std::span<const double> ts);

// Draws, per item in order, x0 ~ N(0, I) then t ~ U[0, 1) from `rng`.
template <typename T>
Tensor<T> cfm_loss(const ItemField<T>& field, std::span<const Tensor<T>> x1s,
                   Rng& rng);

enum class OdeMethod { kEuler, kMidpoint };

std::string_view to_string(OdeMethod m);
OdeMethod ode_method_from_string(std::string_view s);  // ConfigError if unknown

struct OdeConfig {
  std::size_t steps = 32;
  OdeMethod method = OdeMethod::kEuler;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename T>
using Field = std::function<Tensor<T>(const Tensor<T>& x, double t)>;

// The starting noise that sample_ode draws for `shape` under `seed`.
template <typename T>
Tensor<T> ode_initial_noise(const Shape& shape, std::uint64_t seed);

// Integrates from x(0) = ode_initial_noise(shape, cfg.seed) to t = 1 with
// gradient recording disabled. A non-finite field output raises
// NumericError naming the step.
template <typename T>
Tensor<T> sample_ode(const Field<T>& field, const Shape& shape,
                     const OdeConfig& cfg);

template <typename T>
Tensor<T> integrate_ode(const Field<T>& field, const Tensor<T>& x0,
                        const OdeConfig& cfg);

}  // namespace mftts
