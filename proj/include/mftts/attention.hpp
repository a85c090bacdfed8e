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

// Multi-head attention and the three-layer cross-modal alignment block:
// self-attention per modality, bidirectional cross-attention, then
// self-attention again. Each sublayer is post-norm,
// LayerNorm(x + MHA(...)), and there is no feed-forward sublayer.

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "mftts/params.hpp"

namespace mftts {

struct AttentionConfig {
  std::size_t d = 64;
  std::size_t heads = 2;
  double dropout = 0.1;

  void validate() const;  // ContractError on d % heads != 0 or bad dropout
};

// Registers `<name>.{q,k,v,o}.{w,b}`.
template <typename T>
void init_mha(ParamSet<T>& ps, const std::string& name, std::size_t d,
              Rng& rng);

// Q [m x d], K and V [n x d]. `keep`, when non-empty, is an m*n row-major
// mask (1 = attend). A row with no kept entry is a ContractError.
template <typename T>
Tensor<T> multi_head_attention(const ParamSet<T>& ps, const std::string& name,
                               const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, const AttentionConfig& cfg,
                               RunContext<T>& ctx,
                               std::span<const std::uint8_t> keep = {});

template <typename T>
struct AlignedPair {
  Tensor<T> text;   // [T_text x d]
  Tensor<T> audio;  // [T_audio x d]
};

// Six MHA sets (text_self1, audio_self1, text_cross, audio_cross,
// text_self2, audio_self2), each with its own LayerNorm.
template <typename T>
void init_cross_modal_align(ParamSet<T>& ps, const std::string& name,
                            std::size_t d, Rng& rng);

template <typename T>
AlignedPair<T> cross_modal_align(const ParamSet<T>& ps, const std::string& name,
                                 const Tensor<T>& text, const Tensor<T>& audio,
                                 const AttentionConfig& cfg,
                                 RunContext<T>& ctx);

// Sublayer names in block order.
inline constexpr const char* kAlignSublayers[6] = {
    "text_self1", "audio_self1", "text_cross",
    "audio_cross", "text_self2", "audio_self2"};

}  // namespace mftts
