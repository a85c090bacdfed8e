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

// AdamW with decoupled weight decay, global-norm clipping and the
// warmup-then-cosine learning-rate schedule.

#pragma once

#include <cstddef>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mftts/params.hpp"

namespace mftts {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;  // ConfigError
};

// Linear warmup from 0 to `peak` over `warmup` steps, then cosine decay to
// `final_lr` at `steps`. Past `steps` it stays at `final_lr`.
struct LrSchedule {
  double peak = 1e-3;
  double final_lr = 1e-5;
  std::size_t warmup = 50;
  std::size_t steps = 500;

  double at(std::size_t step) const;
  void validate() const;  // ConfigError
};

// Biases and LayerNorm parameters are not decayed.
bool applies_weight_decay(std::string_view param_name);

// sqrt of the sum of squared gradients over every parameter that has one.
template <typename T>
double global_grad_norm(const ParamSet<T>& ps);

// Scales all gradients so the global norm is at most `max_norm`. Returns
// the norm before clipping.
template <typename T>
double clip_grad_norm(ParamSet<T>& ps, double max_norm);

template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {});

  // One update of every parameter with a gradient. Moments are kept in
  // double regardless of T.
  void step(ParamSet<T>& ps, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

}  // namespace mftts
