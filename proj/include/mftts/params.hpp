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

// Named parameter storage and the small layer helpers built on it. Layers
// are free functions that look their weights up by dotted name, so the same
// code runs over float (training) and double (gradient checks) parameters.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mftts/random.hpp"
#include "mftts/tensor.hpp"

namespace mftts {

inline constexpr double kInitStd = 0.02;

template <typename T>
class ParamSet {
 public:
  // Registers a trainable leaf. Names must be unique.
  Tensor<T>& add(const std::string& name, Tensor<T> value);
  const Tensor<T>& get(std::string_view name) const;
  Tensor<T>& get_mut(std::string_view name);
  bool contains(std::string_view name) const;

  // Insertion order, which is also the checkpoint order.
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t numel() const;
  // Sum of numel over names starting with `prefix`.
  std::size_t numel_with_prefix(std::string_view prefix) const;

  void zero_grad();

  // Fresh leaves with the same names and converted values.
  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& n : order_) {
      const auto src = get(n).data();
      std::vector<U> v(src.begin(), src.end());
      out.add(n, Tensor<U>::from(get(n).shape(), std::move(v), true));
    }
    return out;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor<T>> map_;
};

// Shared state for one forward pass.
template <typename T>
struct RunContext {
  bool training = false;
  Rng* rng = nullptr;  // dropout masks; required when training
  // When set, attention layers append (layer name, weights[m x n]) per head.
  std::vector<std::pair<std::string, Tensor<T>>>* attention_probe = nullptr;
};

// Weight [in x out] ~ truncated normal, bias [1 x out] = 0.
template <typename T>
void init_linear(ParamSet<T>& ps, const std::string& name, std::size_t in,
                 std::size_t out, Rng& rng, bool zero_weight = false);

template <typename T>
Tensor<T> linear(const ParamSet<T>& ps, const std::string& name,
                 const Tensor<T>& x);

// gamma = 1, beta = 0, both [d].
template <typename T>
void init_layer_norm(ParamSet<T>& ps, const std::string& name, std::size_t d);

template <typename T>
Tensor<T> layer_norm(const ParamSet<T>& ps, const std::string& name,
                     const Tensor<T>& x);

template <typename T>
Tensor<T> truncated_normal(Shape shape, Rng& rng, double stddev = kInitStd);

}  // namespace mftts
