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

#include "mftts/flow.hpp"

#include <cmath>

#include "mftts/error.hpp"

namespace mftts {

template <typename T>
Tensor<T> interpolate_path(const Tensor<T>& x0, const Tensor<T>& x1, double t) {
  check_same_shape(x0, x1, "interpolate_path");
  if (!(t >= 0.0 && t <= 1.0))
    throw ContractError("interpolate_path: t=" + std::to_string(t) +
                        " outside [0, 1]");
  // Plain blending would turn -0 into +0 at the endpoints.
  if (t == 0.0) return x0;
  if (t == 1.0) return x1;
  return add(scale(x0, static_cast<T>(1.0 - t)), scale(x1, static_cast<T>(t)));
}

template <typename T>
Tensor<T> target_field(const Tensor<T>& x0, const Tensor<T>& x1) {
  check_same_shape(x0, x1, "target_field");
  return sub(x1, x0);
}

template <typename T>
Tensor<T> cfm_loss(const ItemField<T>& field, std::span<const Tensor<T>> x1s,
                   std::span<const Tensor<T>> x0s, std::span<const double> ts) {
  if (x1s.empty()) throw ContractError("cfm_loss: empty batch");
  if (x0s.size() != x1s.size() || ts.size() != x1s.size())
    throw ContractError("cfm_loss: batch arrays differ in length");
  std::vector<Tensor<T>> per_item;
  per_item.reserve(x1s.size());
  for (std::size_t i = 0; i < x1s.size(); ++i) {
    const Tensor<T> xt = interpolate_path(x0s[i], x1s[i], ts[i]);
    const Tensor<T> u = target_field(x0s[i], x1s[i]);
    const Tensor<T> v = field(i, xt, ts[i]);
    check_same_shape(v, u, "cfm_loss field output");
    per_item.push_back(reshape(mean(square(sub(v, u))), {1}));
  }
  return mean(per_item.size() == 1 ? per_item[0] : concat(per_item, 0));
}

template <typename T>
Tensor<T> cfm_loss(const ItemField<T>& field, std::span<const Tensor<T>> x1s,
                   Rng& rng) {
  std::vector<Tensor<T>> x0s;
  std::vector<double> ts;
  for (const auto& x1 : x1s) {
    x0s.push_back(Tensor<T>::randn(x1.shape(), rng));
    ts.push_back(rng.uniform());
  }
  return cfm_loss<T>(field, x1s, x0s, ts);
}

std::string_view to_string(OdeMethod m) {
  return m == OdeMethod::kEuler ? "euler" : "midpoint";
}

OdeMethod ode_method_from_string(std::string_view s) {
  if (s == "euler") return OdeMethod::kEuler;
  if (s == "midpoint") return OdeMethod::kMidpoint;
  throw ConfigError("unknown ODE method '" + std::string(s) +
                    "' (expected euler or midpoint)");
}

void OdeConfig::validate() const {
  if (steps < 1) throw ConfigError("ODE steps must be at least 1");
}

template <typename T>
Tensor<T> ode_initial_noise(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor<T>::randn(shape, rng);
}

namespace {

template <typename T>
Tensor<T> eval_field(const Field<T>& field, const Tensor<T>& x, double t,
                     std::size_t step) {
  Tensor<T> v = field(x, t);
  check_same_shape(v, x, "ODE field output");
  for (T e : v.data()) {
    if (!std::isfinite(e)) {
      throw NumericError("ODE field returned a non-finite value at step " +
                         std::to_string(step) + " (t=" + std::to_string(t) +
                         ")");
    }
  }
  return v;
}

}  // namespace

template <typename T>
Tensor<T> integrate_ode(const Field<T>& field, const Tensor<T>& x0,
                        const OdeConfig& cfg) {
  cfg.validate();
  NoGradGuard guard;
  const double dt = 1.0 / static_cast<double>(cfg.steps);
  Tensor<T> x = x0.detach();
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Tensor<T> v = eval_field(field, x, t, k);
    if (cfg.method == OdeMethod::kEuler) {
      x = add(x, scale(v, static_cast<T>(dt)));
    } else {
      const Tensor<T> mid = add(x, scale(v, static_cast<T>(dt / 2)));
      const Tensor<T> vm = eval_field(field, mid, t + dt / 2, k);
      x = add(x, scale(vm, static_cast<T>(dt)));
    }
  }
  return x;
}

template <typename T>
Tensor<T> sample_ode(const Field<T>& field, const Shape& shape,
                     const OdeConfig& cfg) {
  cfg.validate();
  return integrate_ode(field, ode_initial_noise<T>(shape, cfg.seed), cfg);
}

#define MFTTS_INSTANTIATE_FLOW(T)                                              \
  template Tensor<T> interpolate_path<T>(const Tensor<T>&, const Tensor<T>&,   \
                                         double);                              \
  template Tensor<T> target_field<T>(const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> cfm_loss<T>(const ItemField<T>&,                          \
                                 std::span<const Tensor<T>>,                   \
                                 std::span<const Tensor<T>>,                   \
                                 std::span<const double>);                     \
  template Tensor<T> cfm_loss<T>(const ItemField<T>&,                          \
                                 std::span<const Tensor<T>>, Rng&);            \
  template Tensor<T> ode_initial_noise<T>(const Shape&, std::uint64_t);        \
  template Tensor<T> integrate_ode<T>(const Field<T>&, const Tensor<T>&,       \
                                      const OdeConfig&);                       \
  template Tensor<T> sample_ode<T>(const Field<T>&, const Shape&,              \
                                   const OdeConfig&);

MFTTS_INSTANTIATE_FLOW(float)
MFTTS_INSTANTIATE_FLOW(double)

}  // namespace mftts
