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

#include "mftts/params.hpp"

#include "mftts/error.hpp"

namespace mftts {

template <typename T>
Tensor<T>& ParamSet<T>::add(const std::string& name, Tensor<T> value) {
  if (map_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
  value.set_requires_grad(true);
  order_.push_back(name);
  return map_.emplace(name, std::move(value)).first->second;
}

template <typename T>
const Tensor<T>& ParamSet<T>::get(std::string_view name) const {
  auto it = map_.find(std::string(name));
  if (it == map_.end())
    throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ParamSet<T>::get_mut(std::string_view name) {
  auto it = map_.find(std::string(name));
  if (it == map_.end())
    throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
bool ParamSet<T>::contains(std::string_view name) const {
  return map_.count(std::string(name)) != 0;
}

template <typename T>
std::size_t ParamSet<T>::numel() const {
  return numel_with_prefix("");
}

template <typename T>
std::size_t ParamSet<T>::numel_with_prefix(std::string_view prefix) const {
  std::size_t n = 0;
  for (const auto& name : order_)
    if (name.starts_with(prefix)) n += map_.at(name).size();
  return n;
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& [name, t] : map_) t.zero_grad();
}

template <typename T>
Tensor<T> truncated_normal(Shape shape, Rng& rng, double stddev) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.truncated_normal(stddev));
  return Tensor<T>::from(std::move(shape), std::move(v));
}

template <typename T>
void init_linear(ParamSet<T>& ps, const std::string& name, std::size_t in,
                 std::size_t out, Rng& rng, bool zero_weight) {
  ps.add(name + ".w", zero_weight ? Tensor<T>::zeros({in, out})
                                  : truncated_normal<T>({in, out}, rng));
  ps.add(name + ".b", Tensor<T>::zeros({1, out}));
}

template <typename T>
Tensor<T> linear(const ParamSet<T>& ps, const std::string& name,
                 const Tensor<T>& x) {
  return add(matmul(x, ps.get(name + ".w")), ps.get(name + ".b"));
}

template <typename T>
void init_layer_norm(ParamSet<T>& ps, const std::string& name, std::size_t d) {
  ps.add(name + ".gamma", Tensor<T>::full({d}, T(1)));
  ps.add(name + ".beta", Tensor<T>::zeros({d}));
}

template <typename T>
Tensor<T> layer_norm(const ParamSet<T>& ps, const std::string& name,
                     const Tensor<T>& x) {
  return layer_norm(x, ps.get(name + ".gamma"), ps.get(name + ".beta"));
}

#define MFTTS_INSTANTIATE_PARAMS(T)                                           \
  template class ParamSet<T>;                                                 \
  template Tensor<T> truncated_normal<T>(Shape, Rng&, double);                \
  template void init_linear<T>(ParamSet<T>&, const std::string&, std::size_t, \
                               std::size_t, Rng&, bool);                      \
  template Tensor<T> linear<T>(const ParamSet<T>&, const std::string&,        \
                               const Tensor<T>&);                             \
  template void init_layer_norm<T>(ParamSet<T>&, const std::string&,          \
                                   std::size_t);                              \
  template Tensor<T> layer_norm<T>(const ParamSet<T>&, const std::string&,    \
                                   const Tensor<T>&);

MFTTS_INSTANTIATE_PARAMS(float)
MFTTS_INSTANTIATE_PARAMS(double)

}  // namespace mftts
