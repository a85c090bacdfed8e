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

#include "mftts/attention.hpp"

#include <cmath>
#include <vector>

#include "mftts/error.hpp"

namespace mftts {

void AttentionConfig::validate() const {
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw ContractError("attention: model dim " + std::to_string(d) +
                        " is not divisible by " + std::to_string(heads) +
                        " heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ContractError("attention: dropout must lie in [0, 1)");
}

template <typename T>
void init_mha(ParamSet<T>& ps, const std::string& name, std::size_t d,
              Rng& rng) {
  for (const char* p : {".q", ".k", ".v", ".o"})
    init_linear(ps, name + p, d, d, rng);
}

template <typename T>
Tensor<T> multi_head_attention(const ParamSet<T>& ps, const std::string& name,
                               const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, const AttentionConfig& cfg,
                               RunContext<T>& ctx,
                               std::span<const std::uint8_t> keep) {
  cfg.validate();
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != cfg.d ||
      k.dim(1) != cfg.d || v.dim(1) != cfg.d || k.dim(0) != v.dim(0)) {
    throw DimensionError("attention '" + name + "': Q " + shape_str(q.shape()) +
                         ", K " + shape_str(k.shape()) + ", V " +
                         shape_str(v.shape()) + " with d=" +
                         std::to_string(cfg.d));
  }
  const std::size_t m = q.dim(0), n = k.dim(0);
  if (!keep.empty() && keep.size() != m * n) {
    throw DimensionError("attention '" + name + "': mask has " +
                         std::to_string(keep.size()) + " entries, expected " +
                         std::to_string(m * n));
  }
  const Tensor<T> qp = linear(ps, name + ".q", q);
  const Tensor<T> kp = linear(ps, name + ".k", k);
  const Tensor<T> vp = linear(ps, name + ".v", v);
  const std::size_t dh = cfg.d / cfg.heads;
  const T inv_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  std::vector<Tensor<T>> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Tensor<T> qh = slice(qp, 1, h * dh, (h + 1) * dh);
    const Tensor<T> kh = slice(kp, 1, h * dh, (h + 1) * dh);
    const Tensor<T> vh = slice(vp, 1, h * dh, (h + 1) * dh);
    const Tensor<T> scores = scale(matmul(qh, transpose(kh)), inv_scale);
    Tensor<T> w = keep.empty() ? softmax(scores, 1)
                               : masked_softmax(scores, keep);
    if (ctx.attention_probe) ctx.attention_probe->emplace_back(name, w);
    w = dropout(w, cfg.dropout, ctx.training, ctx.rng);
    heads.push_back(matmul(w, vh));
  }
  const Tensor<T> joined = cfg.heads == 1 ? heads[0] : concat(heads, 1);
  return linear(ps, name + ".o", joined);
}

template <typename T>
void init_cross_modal_align(ParamSet<T>& ps, const std::string& name,
                            std::size_t d, Rng& rng) {
  for (const char* sub : kAlignSublayers) {
    init_mha(ps, name + "." + sub, d, rng);
    init_layer_norm(ps, name + "." + sub + ".ln", d);
  }
}

template <typename T>
AlignedPair<T> cross_modal_align(const ParamSet<T>& ps, const std::string& name,
                                 const Tensor<T>& text, const Tensor<T>& audio,
                                 const AttentionConfig& cfg,
                                 RunContext<T>& ctx) {
  auto sub = [&](const char* which, const Tensor<T>& x, const Tensor<T>& kv) {
    const std::string n = name + "." + which;
    return layer_norm(ps, n + ".ln",
                      add(x, multi_head_attention(ps, n, x, kv, kv, cfg, ctx)));
  };
  const Tensor<T> t1 = sub("text_self1", text, text);
  const Tensor<T> a1 = sub("audio_self1", audio, audio);
  const Tensor<T> t2 = sub("text_cross", t1, a1);
  const Tensor<T> a2 = sub("audio_cross", a1, t1);
  return {sub("text_self2", t2, t2), sub("audio_self2", a2, a2)};
}

#define MFTTS_INSTANTIATE_ATTENTION(T)                                         \
  template void init_mha<T>(ParamSet<T>&, const std::string&, std::size_t,     \
                            Rng&);                                             \
  template Tensor<T> multi_head_attention<T>(                                  \
      const ParamSet<T>&, const std::string&, const Tensor<T>&,                \
      const Tensor<T>&, const Tensor<T>&, const AttentionConfig&,              \
      RunContext<T>&, std::span<const std::uint8_t>);                          \
  template void init_cross_modal_align<T>(ParamSet<T>&, const std::string&,    \
                                          std::size_t, Rng&);                  \
  template AlignedPair<T> cross_modal_align<T>(                                \
      const ParamSet<T>&, const std::string&, const Tensor<T>&,                \
      const Tensor<T>&, const AttentionConfig&, RunContext<T>&);

MFTTS_INSTANTIATE_ATTENTION(float)
MFTTS_INSTANTIATE_ATTENTION(double)

}  // namespace mftts
