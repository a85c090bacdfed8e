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

// The synthesis network.
//
//   condition encoder   phoneme embedding -> conv -> GELU -> conv with a
//                       residual back to the embedding, plus the averaged
//                       syllable/morpheme embeddings, a prosody projection
//                       and a speaker projection, then a linear map to d.
//   duration predictor  LSTM over the (detached) encoding; predicts the log
//                       of the total frame count.
//   field network       mel frames -> d, the normalized condition stretched
//                       evenly over the frames and added in, positional and
//                       time encodings, one cross-modal alignment block (text
//                       vs frames), then DiT layers with adaptive LayerNorm
//                       driven by the time embedding and the pooled aligned
//                       text. The output is a zero-initialized projection back
//                       to mel bins plus x_t gated per bin by the time
//                       embedding.
//
// Embedding tables start at unit scale; projections use the truncated
// normal. Optional tiers draw their initial values from their own streams,
// so enabling one leaves the others unchanged.
//
// Everything is templated over float (training) and double (gradient
// checks); parameters live in a ParamSet under dotted names.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mftts/attention.hpp"
#include "mftts/audio.hpp"
#include "mftts/config.hpp"
#include "mftts/flow.hpp"
#include "mftts/frontend.hpp"
#include "mftts/hca.hpp"
#include "mftts/params.hpp"

namespace mftts {

struct ModelConfig {
  std::size_t vocab = 64;  // phoneme ids, reserved ones included
  std::size_t mel_bins = 16;
  std::size_t enc_layers = 2;
  std::size_t enc_channels = 64;
  std::size_t enc_kernel = 5;
  std::size_t dit_layers = 2;
  std::size_t dit_heads = 2;
  std::size_t dit_hidden = 64;
  std::size_t ff_mult = 2;
  std::size_t dur_layers = 1;
  std::size_t dur_hidden = 32;
  std::size_t speakers = 4;
  std::size_t speaker_dim = 8;
  std::size_t hca_dim = 32;
  double attn_dropout = 0.1;
  double ff_dropout = 0.15;
  bool use_syll = true;  // tier masks for the ablation
  bool use_pros = true;

  void validate() const;
  // Reads the model keys it knows; the others are left for the caller.
  static ModelConfig from_config(ConfigMap& cfg);
  void to_config(ConfigMap& cfg) const;
  AttentionConfig attention() const {
    return {dit_hidden, dit_heads, attn_dropout};
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Per-phoneme view of the three tiers, as the encoder consumes it.
inline constexpr std::size_t kProsodyFeatures = kSentenceTypeCount + 2;

struct CondInput {
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> syll_pos;   // 0 initial, 1 medial, 2 final
  std::vector<std::int32_t> morph;      // 0 root, 1 suffix
  std::vector<std::int32_t> word_init;  // 1 on a word's first phoneme
  std::vector<double> prosody;  // size() x kProsodyFeatures: sentence type
                                // one-hot, word prominence, boundary strength

  std::size_t size() const { return ids.size(); }
};

CondInput cond_input(const HierarchicalText& ht);
// ref, then one separator token, then tgt.
CondInput join_reference(const CondInput& ref, const CondInput& tgt);

template <typename T>
struct Model {
  ModelConfig cfg;
  ParamSet<T> params;

  // Truncated-normal projections, zero biases, zero output projection.
  static Model init(const ModelConfig& cfg, std::uint64_t seed);
};

template <typename T>
struct Encoded {
  Tensor<T> out;  // [T x d]
  // Per-tier contributions [T x enc_channels] (undefined when masked).
  std::array<Tensor<T>, kTierCount> tiers;
};

template <typename T>
Encoded<T> encode_conditions(const Model<T>& m, const CondInput& in,
                             std::size_t speaker, RunContext<T>& ctx);

// Log of the total frame count, shape {1, 1}. The encoding is detached so
// the duration loss trains only the predictor.
template <typename T>
Tensor<T> duration_log_frames(const Model<T>& m, const Tensor<T>& cond);

// round(exp(log_frames)) clamped to [tokens, 200 * tokens].
std::size_t decode_duration(double log_frames, std::size_t tokens);

template <typename T>
std::size_t predict_duration(const Model<T>& m, const Tensor<T>& cond);

// v(x_t, t | cond) with x_t [F x mel_bins]; output has x_t's shape. When
// `hidden` is given it receives the final normalized states [F x d].
template <typename T>
Tensor<T> forward_field(const Model<T>& m, const Tensor<T>& x_t, double t,
                        const Tensor<T>& cond, RunContext<T>& ctx,
                        Tensor<T>* hidden = nullptr);

// Speech-side contrastive embedding for one tier from the field's final
// hidden states [F x d], shape [1 x hca_dim].
template <typename T>
Tensor<T> speech_embedding(const Model<T>& m, const Tensor<T>& hidden, Tier tier);

// Condition-side embedding of one tier, shape [1 x hca_dim]. Tier k pools
// its own contribution plus those of the tiers below it.
template <typename T>
Tensor<T> condition_embedding(const Model<T>& m, const Encoded<T>& enc,
                              Tier tier);

// Which tiers take part in the contrastive loss for this model.
std::array<bool, kTierCount> active_tiers(const ModelConfig& cfg,
                                          const HcaConfig& hca);

// Parameter count per component, computed from the config alone.
std::map<std::string, std::size_t> parameter_breakdown(const ModelConfig& cfg);
std::size_t parameter_count(const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Synthesis

struct SynthesisRequest {
  std::string text;
  std::optional<MelSpectrogram> ref_mel;
  std::optional<std::string> ref_text;  // required iff ref_mel is set
  std::size_t speaker = 0;
  // Forces the output length; predicted when unset.
  std::optional<std::size_t> frames;
};

// The result carries a default MelConfig with bins set to mel_bins.
MelSpectrogram synthesize(const Model<float>& m, const Frontend& fe,
                          const SynthesisRequest& req, const OdeConfig& ode);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Model<float>& m);
// Reads a checkpoint. When `expected` is given, a differing model config is
// a CheckpointError naming the first differing key.
Model<float> load_checkpoint(const std::filesystem::path& path,
                             const ModelConfig* expected = nullptr);

}  // namespace mftts
