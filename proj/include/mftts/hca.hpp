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

// Hierarchical contrastive alignment: one InfoNCE term per condition tier
// (phoneme, syllable, prosody), weighted and summed. Similarity is cosine
// divided by a temperature.

#pragma once

#include <array>
#include <span>

#include "mftts/tensor.hpp"

namespace mftts {

inline constexpr std::size_t kTierCount = 3;
enum class Tier : std::size_t { kPhon = 0, kSyll = 1, kPros = 2 };
inline constexpr const char* kTierNames[kTierCount] = {"phon", "syll", "pros"};

struct HcaConfig {
  std::array<double, kTierCount> lambdas{1.0, 1.0, 1.0};
  double tau = 0.1;

  void validate() const;  // ContractError on negative lambda or tau <= 0
};

// cos(e_x, e_c) / tau. Zero-norm input is a ContractError.
double similarity(std::span<const double> e_x, std::span<const double> e_c,
                  double tau);

// [m x n] matrix of cos(a_i, b_j) / tau, differentiable.
template <typename T>
Tensor<T> similarity_matrix(const Tensor<T>& a, const Tensor<T>& b, double tau);

// Scores [P x (1 + N)] with the positive in column 0. Returns the mean over
// rows of -log softmax(row)[0]. Needs N >= 1.
template <typename T>
Tensor<T> info_nce(const Tensor<T>& scores);

// Square scores [B x B] whose diagonal holds the positives (in-batch
// negatives). Needs B >= 2.
template <typename T>
Tensor<T> info_nce_in_batch(const Tensor<T>& scores);

// sum_k lambda_k * info_nce(scores[k]). Tiers with lambda 0 are skipped and
// may be passed as empty (default-constructed shape-{} zero) tensors.
template <typename T>
Tensor<T> hca_loss(const std::array<Tensor<T>, kTierCount>& scores,
                   const HcaConfig& cfg);

}  // namespace mftts
