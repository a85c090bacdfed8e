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

#include "mftts/optim.hpp"

#include <cmath>
#include <numbers>

#include "mftts/error.hpp"

namespace mftts {

void AdamWConfig::validate() const {
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError("AdamW betas must lie in [0, 1)");
  if (!(eps > 0)) throw ConfigError("AdamW eps must be positive");
  if (!(weight_decay >= 0)) throw ConfigError("weight decay must be non-negative");
}

double LrSchedule::at(std::size_t step) const {
  if (step >= steps) return final_lr;
  if (step <= warmup)
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(steps - warmup);
  return final_lr + 0.5 * (peak - final_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

void LrSchedule::validate() const {
  if (steps == 0) throw ConfigError("training needs at least one step");
  if (warmup == 0 || warmup >= steps)
    throw ConfigError("warmup (" + std::to_string(warmup) + ") must lie in [1, steps=" +
                      std::to_string(steps) + ")");
  if (!(peak > 0) || !(final_lr >= 0) || final_lr > peak)
    throw ConfigError("learning rates need 0 <= final_lr <= peak, peak > 0");
}

bool applies_weight_decay(std::string_view name) {
  auto ends = [&](std::string_view s) {
    return name.size() >= s.size() && name.substr(name.size() - s.size()) == s;
  };
  return !(ends(".b") || ends(".gamma") || ends(".beta"));
}

template <typename T>
double global_grad_norm(const ParamSet<T>& ps) {
  double s = 0.0;
  for (const auto& n : ps.names()) {
    const Tensor<T>& p = ps.get(n);
    if (!p.has_grad()) continue;
    for (T g : p.grad()) s += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(s);
}

template <typename T>
double clip_grad_norm(ParamSet<T>& ps, double max_norm) {
  if (!(max_norm > 0)) throw ContractError("clip norm must be positive");
  const double norm = global_grad_norm(ps);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (const auto& n : ps.names()) {
      Tensor<T>& p = ps.get_mut(n);
      if (!p.has_grad()) continue;
      for (T& g : p.mutable_grad()) g = static_cast<T>(g * k);
    }
  }
  return norm;
}

template <typename T>
AdamW<T>::AdamW(AdamWConfig cfg) : cfg_(cfg) {
  cfg_.validate();
}

template <typename T>
void AdamW<T>::step(ParamSet<T>& ps, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& n : ps.names()) {
    Tensor<T>& p = ps.get_mut(n);
    if (!p.has_grad()) continue;
    Moments& st = state_[n];
    if (st.m.empty()) {
      st.m.assign(p.size(), 0.0);
      st.v.assign(p.size(), 0.0);
    }
    const auto g = p.grad();
    auto w = p.mutable_data();
    const double decay = applies_weight_decay(n) ? lr * cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      st.m[i] = cfg_.beta1 * st.m[i] + (1 - cfg_.beta1) * gi;
      st.v[i] = cfg_.beta2 * st.v[i] + (1 - cfg_.beta2) * gi * gi;
      double x = static_cast<double>(w[i]);
      x -= decay * x;
      x -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg_.eps);
      w[i] = static_cast<T>(x);
    }
  }
}

template double global_grad_norm<float>(const ParamSet<float>&);
template double global_grad_norm<double>(const ParamSet<double>&);
template double clip_grad_norm<float>(ParamSet<float>&, double);
template double clip_grad_norm<double>(ParamSet<double>&, double);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace mftts
