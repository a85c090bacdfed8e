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

#include "mftts/hca.hpp"

#include <cmath>

#include "mftts/error.hpp"

namespace mftts {

void HcaConfig::validate() const {
  for (double l : lambdas)
    if (!(l >= 0.0)) throw ContractError("hca: lambda must be >= 0");
  if (!(tau > 0.0)) throw ContractError("hca: temperature must be > 0");
}

double similarity(std::span<const double> e_x, std::span<const double> e_c,
                  double tau) {
  if (e_x.size() != e_c.size())
    throw DimensionError("similarity: embedding sizes " +
                         std::to_string(e_x.size()) + " and " +
                         std::to_string(e_c.size()));
  if (!(tau > 0.0)) throw ContractError("similarity: temperature must be > 0");
  double dot = 0, nx = 0, nc = 0;
  for (std::size_t i = 0; i < e_x.size(); ++i) {
    dot += e_x[i] * e_c[i];
    nx += e_x[i] * e_x[i];
    nc += e_c[i] * e_c[i];
  }
  if (nx == 0.0 || nc == 0.0)
    throw ContractError("similarity: zero-norm embedding");
  return dot / (std::sqrt(nx) * std::sqrt(nc)) / tau;
}

namespace {

template <typename T>
Tensor<T> unit_rows(const Tensor<T>& x, const char* what) {
  if (x.rank() != 2) throw DimensionError(std::string(what) + " must be rank 2");
  const Tensor<T> norms = sqrt(sum_axis(square(x), 1));
  for (T n : norms.data())
    if (!(n > T(0))) throw ContractError(std::string(what) + ": zero-norm embedding");
  return div(x, norms);
}

}  // namespace

template <typename T>
Tensor<T> similarity_matrix(const Tensor<T>& a, const Tensor<T>& b,
                            double tau) {
  if (!(tau > 0.0)) throw ContractError("similarity: temperature must be > 0");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw DimensionError("similarity_matrix: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  return scale(matmul(unit_rows(a, "similarity"), transpose(unit_rows(b, "similarity"))),
               static_cast<T>(1.0 / tau));
}

template <typename T>
Tensor<T> info_nce(const Tensor<T>& scores) {
  if (scores.rank() != 2 || scores.dim(0) == 0)
    throw DimensionError("info_nce: scores must be [P x (1+N)], got " +
                         shape_str(scores.shape()));
  if (scores.dim(1) < 2) throw ContractError("info_nce: no negatives");
  return scale(mean(slice(log_softmax(scores, 1), 1, 0, 1)), T(-1));
}

template <typename T>
Tensor<T> info_nce_in_batch(const Tensor<T>& scores) {
  if (scores.rank() != 2 || scores.dim(0) != scores.dim(1))
    throw DimensionError("info_nce_in_batch: scores must be square, got " +
                         shape_str(scores.shape()));
  const std::size_t b = scores.dim(0);
  if (b < 2) throw ContractError("info_nce_in_batch: no negatives in a batch of 1");
  std::vector<T> eye(b * b, T(0));
  for (std::size_t i = 0; i < b; ++i) eye[i * b + i] = T(1);
  const Tensor<T> diag = mul(log_softmax(scores, 1), Tensor<T>::from({b, b}, eye));
  return scale(sum(diag), static_cast<T>(-1.0 / static_cast<double>(b)));
}

template <typename T>
Tensor<T> hca_loss(const std::array<Tensor<T>, kTierCount>& scores,
                   const HcaConfig& cfg) {
  cfg.validate();
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (std::size_t k = 0; k < kTierCount; ++k) {
    if (cfg.lambdas[k] == 0.0) continue;
    total = add(total, scale(info_nce(scores[k]), static_cast<T>(cfg.lambdas[k])));
  }
  return total;
}

#define MFTTS_INSTANTIATE_HCA(T)                                               \
  template Tensor<T> similarity_matrix<T>(const Tensor<T>&, const Tensor<T>&,  \
                                          double);                             \
  template Tensor<T> info_nce<T>(const Tensor<T>&);                            \
  template Tensor<T> info_nce_in_batch<T>(const Tensor<T>&);                   \
  template Tensor<T> hca_loss<T>(const std::array<Tensor<T>, kTierCount>&,     \
                                 const HcaConfig&);

MFTTS_INSTANTIATE_HCA(float)
MFTTS_INSTANTIATE_HCA(double)

}  // namespace mftts
