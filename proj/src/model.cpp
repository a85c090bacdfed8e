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

#include "mftts/model.hpp"

#include <algorithm>
#include <cmath>

#include "mftts/error.hpp"

namespace mftts {

namespace {

// Positions are fractions of the sequence length scaled into the range
// where the sinusoid frequencies resolve neighbouring tokens and frames.
constexpr double kPositionScale = 100.0;
constexpr double kTimeScale = 1000.0;

constexpr std::size_t kSyllPositions = 3;

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
}

std::string layer(const char* prefix, std::size_t i) {
  return std::string(prefix) + std::to_string(i);
}

template <typename T>
Tensor<T> positions(std::size_t n, std::size_t dim) {
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i)
    p[i] = kPositionScale * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return sinusoidal_encoding<T>(p, dim);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
  require_positive(vocab, "vocab");
  require_positive(mel_bins, "mel_bins");
  require_positive(enc_layers, "enc_layers");
  require_positive(enc_channels, "enc_channels");
  require_positive(dit_layers, "dit_layers");
  require_positive(dit_heads, "dit_heads");
  require_positive(dit_hidden, "dit_hidden");
  require_positive(ff_mult, "ff_mult");
  require_positive(dur_layers, "dur_layers");
  require_positive(dur_hidden, "dur_hidden");
  require_positive(speakers, "speakers");
  require_positive(speaker_dim, "speaker_dim");
  require_positive(hca_dim, "hca_dim");
  if (vocab <= static_cast<std::size_t>(kFirstPhonemeId))
    throw ConfigError("model config: vocab must exceed the reserved ids");
  if (enc_kernel % 2 == 0) throw ConfigError("model config: enc_kernel must be odd");
  if (dit_hidden % dit_heads != 0)
    throw ConfigError("model config: dit_hidden must be divisible by dit_heads");
  if (dit_hidden % 2 != 0) throw ConfigError("model config: dit_hidden must be even");
  if (!(attn_dropout >= 0 && attn_dropout < 1) || !(ff_dropout >= 0 && ff_dropout < 1))
    throw ConfigError("model config: dropout rates must lie in [0, 1)");
}

ModelConfig ModelConfig::from_config(ConfigMap& c) {
  ModelConfig m;
  m.vocab = c.get_size("vocab", m.vocab);
  m.mel_bins = c.get_size("mel_bins", m.mel_bins);
  m.enc_layers = c.get_size("enc_layers", m.enc_layers);
  m.enc_channels = c.get_size("enc_channels", m.enc_channels);
  m.enc_kernel = c.get_size("enc_kernel", m.enc_kernel);
  m.dit_layers = c.get_size("dit_layers", m.dit_layers);
  m.dit_heads = c.get_size("dit_heads", m.dit_heads);
  m.dit_hidden = c.get_size("dit_hidden", m.dit_hidden);
  m.ff_mult = c.get_size("ff_mult", m.ff_mult);
  m.dur_layers = c.get_size("dur_layers", m.dur_layers);
  m.dur_hidden = c.get_size("dur_hidden", m.dur_hidden);
  m.speakers = c.get_size("speakers", m.speakers);
  m.speaker_dim = c.get_size("speaker_dim", m.speaker_dim);
  m.hca_dim = c.get_size("hca_dim", m.hca_dim);
  m.attn_dropout = c.get_double("attn_dropout", m.attn_dropout);
  m.ff_dropout = c.get_double("ff_dropout", m.ff_dropout);
  m.use_syll = c.get_bool("use_syll", m.use_syll);
  m.use_pros = c.get_bool("use_pros", m.use_pros);
  m.validate();
  return m;
}

void ModelConfig::to_config(ConfigMap& c) const {
  auto sz = [&](const char* k, std::size_t v) { c.set(k, std::to_string(v)); };
  sz("vocab", vocab);
  sz("mel_bins", mel_bins);
  sz("enc_layers", enc_layers);
  sz("enc_channels", enc_channels);
  sz("enc_kernel", enc_kernel);
  sz("dit_layers", dit_layers);
  sz("dit_heads", dit_heads);
  sz("dit_hidden", dit_hidden);
  sz("ff_mult", ff_mult);
  sz("dur_layers", dur_layers);
  sz("dur_hidden", dur_hidden);
  sz("speakers", speakers);
  sz("speaker_dim", speaker_dim);
  sz("hca_dim", hca_dim);
  c.set("attn_dropout", format_double(attn_dropout));
  c.set("ff_dropout", format_double(ff_dropout));
  c.set("use_syll", use_syll ? "true" : "false");
  c.set("use_pros", use_pros ? "true" : "false");
}

// ---------------------------------------------------------------------------
// Condition input

CondInput cond_input(const HierarchicalText& ht) {
  const std::size_t n = ht.phon.size();
  CondInput in;
  in.ids = ht.phon.ids;
  in.syll_pos.assign(n, 0);
  in.morph.assign(n, 0);
  in.word_init.assign(n, 0);
  in.prosody.assign(n * kProsodyFeatures, 0.0);
  for (const Span& s : ht.syll.syllables) {
    for (std::size_t i = s.begin; i < s.end; ++i) {
      in.syll_pos[i] = i == s.begin ? 0 : (i + 1 == s.end ? 2 : 1);
    }
  }
  for (const Morpheme& m : ht.syll.morphemes)
    for (std::size_t i = m.span.begin; i < m.span.end; ++i)
      in.morph[i] = m.kind == MorphKind::kSuffix ? 1 : 0;
  const auto& ws = ht.syll.word_starts;
  for (std::size_t w = 0; w < ws.size(); ++w) {
    const std::size_t end = w + 1 < ws.size() ? ws[w + 1] : n;
    const double boundary =
        ht.pros.boundaries[w] == Boundary::kMajor
            ? 1.0
            : (ht.pros.boundaries[w] == Boundary::kMinor ? 0.5 : 0.0);
    in.word_init[ws[w]] = 1;
    for (std::size_t i = ws[w]; i < end; ++i) {
      double* row = in.prosody.data() + i * kProsodyFeatures;
      row[static_cast<std::size_t>(ht.pros.type)] = 1.0;
      row[kSentenceTypeCount] = ht.pros.prominence[w];
      row[kSentenceTypeCount + 1] = boundary;
    }
  }
  return in;
}

CondInput join_reference(const CondInput& ref, const CondInput& tgt) {
  CondInput out = ref;
  out.ids.push_back(kSeparatorId);
  out.syll_pos.push_back(0);
  out.morph.push_back(0);
  out.word_init.push_back(1);
  out.prosody.insert(out.prosody.end(), kProsodyFeatures, 0.0);
  out.ids.insert(out.ids.end(), tgt.ids.begin(), tgt.ids.end());
  out.syll_pos.insert(out.syll_pos.end(), tgt.syll_pos.begin(), tgt.syll_pos.end());
  out.morph.insert(out.morph.end(), tgt.morph.begin(), tgt.morph.end());
  out.word_init.insert(out.word_init.end(), tgt.word_init.begin(), tgt.word_init.end());
  out.prosody.insert(out.prosody.end(), tgt.prosody.begin(), tgt.prosody.end());
  return out;
}

// ---------------------------------------------------------------------------
// Init

// Lookup tables start at unit scale so that optimizer steps do not swamp
// the initial identity signal; projections keep the small default.
constexpr double kEmbeddingStd = 1.0;
constexpr std::uint64_t kOptionalTierSalt = 0x7469657273ull;

template <typename T>
Model<T> Model<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  ParamSet<T>& ps = m.params;
  Rng rng(seed);
  const std::size_t C = cfg.enc_channels, d = cfg.dit_hidden,
                    H = cfg.dur_hidden, K = cfg.enc_kernel;

  ps.add("enc.phone_emb", truncated_normal<T>({cfg.vocab, C}, rng, kEmbeddingStd));
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    const std::string n = layer("enc.conv", l);
    ps.add(n + ".w", truncated_normal<T>({C, C, K}, rng));
    ps.add(n + ".b", Tensor<T>::zeros({C}));
  }
  // Optional tiers draw from their own streams so that masking a tier
  // leaves every shared parameter with the same initial value.
  if (cfg.use_syll) {
    Rng r = rng.fork(kOptionalTierSalt + 1);
    ps.add("enc.syll_pos", truncated_normal<T>({kSyllPositions, C}, r, kEmbeddingStd));
    ps.add("enc.morph", truncated_normal<T>({2, C}, r, kEmbeddingStd));
    ps.add("enc.word_init", truncated_normal<T>({2, C}, r, kEmbeddingStd));
  }
  if (cfg.use_pros) {
    Rng r = rng.fork(kOptionalTierSalt + 2);
    init_linear(ps, "enc.pros", kProsodyFeatures, C, r);
  }
  ps.add("enc.spk_emb", truncated_normal<T>({cfg.speakers, cfg.speaker_dim}, rng, kEmbeddingStd));
  init_linear(ps, "enc.spk_proj", cfg.speaker_dim, C, rng);
  init_linear(ps, "enc.out", C, d, rng);

  for (std::size_t l = 0; l < cfg.dur_layers; ++l) {
    const std::string n = layer("dur.lstm", l);
    const std::size_t in = l == 0 ? d : H;
    ps.add(n + ".wx", truncated_normal<T>({in, 4 * H}, rng));
    ps.add(n + ".wh", truncated_normal<T>({H, 4 * H}, rng));
    ps.add(n + ".b", Tensor<T>::zeros({1, 4 * H}));
  }
  init_linear(ps, "dur.head", H, 1, rng);

  init_linear(ps, "field.mel_in", cfg.mel_bins, d, rng);
  init_layer_norm(ps, "field.cond_ln", d);
  init_linear(ps, "field.time1", d, d, rng);
  init_linear(ps, "field.time2", d, d, rng);
  init_cross_modal_align(ps, "field.cma", d, rng);
  init_linear(ps, "field.cond_pool", d, d, rng);
  const std::size_t fd = cfg.ff_mult * d;
  for (std::size_t l = 0; l < cfg.dit_layers; ++l) {
    const std::string n = layer("field.dit", l);
    init_linear(ps, n + ".ada", d, 6 * d, rng);
    init_mha(ps, n + ".attn", d, rng);
    init_linear(ps, n + ".ff1", d, fd, rng);
    init_linear(ps, n + ".ff2", fd, d, rng);
  }
  init_layer_norm(ps, "field.final_ln", d);
  init_linear(ps, "field.out", d, cfg.mel_bins, rng, /*zero_weight=*/true);
  init_linear(ps, "field.skip", d, cfg.mel_bins, rng, /*zero_weight=*/true);

  for (std::size_t k = 0; k < kTierCount; ++k) {
    if (k == 1 && !cfg.use_syll) continue;
    if (k == 2 && !cfg.use_pros) continue;
    Rng r = rng.fork(kOptionalTierSalt + 16 + k);
    init_linear(ps, std::string("hca.x.") + kTierNames[k], d, cfg.hca_dim, r);
    init_linear(ps, std::string("hca.c.") + kTierNames[k], C, cfg.hca_dim, r);
  }
  return m;
}

std::map<std::string, std::size_t> parameter_breakdown(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.enc_channels, d = cfg.dit_hidden,
                    H = cfg.dur_hidden, K = cfg.enc_kernel, M = cfg.mel_bins,
                    fd = cfg.ff_mult * d;
  auto lin = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::map<std::string, std::size_t> b;
  b["encoder.phoneme"] = cfg.vocab * C + cfg.enc_layers * (C * C * K + C);
  b["encoder.syllable"] = cfg.use_syll ? (kSyllPositions + 2 + 2) * C : 0;
  b["encoder.prosody"] = cfg.use_pros ? lin(kProsodyFeatures, C) : 0;
  b["encoder.speaker"] = cfg.speakers * cfg.speaker_dim + lin(cfg.speaker_dim, C);
  b["encoder.out"] = lin(C, d);
  std::size_t dur = lin(H, 1);
  for (std::size_t l = 0; l < cfg.dur_layers; ++l)
    dur += (l == 0 ? d : H) * 4 * H + H * 4 * H + 4 * H;
  b["duration"] = dur;
  b["field.io"] = lin(M, d) + 4 * d + 2 * lin(d, M);
  b["field.time"] = 2 * lin(d, d);
  b["field.cross_modal_align"] = 6 * (4 * lin(d, d) + 2 * d);
  b["field.cond_pool"] = lin(d, d);
  b["field.dit"] =
      cfg.dit_layers * (lin(d, 6 * d) + 4 * lin(d, d) + lin(d, fd) + lin(fd, d));
  const std::size_t tiers = 1 + (cfg.use_syll ? 1 : 0) + (cfg.use_pros ? 1 : 0);
  b["hca"] = tiers * (lin(d, cfg.hca_dim) + lin(C, cfg.hca_dim));
  return b;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [k, v] : parameter_breakdown(cfg)) n += v;
  return n;
}

// ---------------------------------------------------------------------------
// Encoder

template <typename T>
Encoded<T> encode_conditions(const Model<T>& m, const CondInput& in,
                             std::size_t speaker, RunContext<T>&) {
  const ModelConfig& cfg = m.cfg;
  const ParamSet<T>& ps = m.params;
  const std::size_t n = in.size();
  if (n == 0) throw ContractError("encode_conditions: empty phoneme sequence");
  if (in.syll_pos.size() != n || in.morph.size() != n ||
      in.word_init.size() != n || in.prosody.size() != n * kProsodyFeatures)
    throw ContractError("encode_conditions: tier arrays differ in length");
  for (std::int32_t id : in.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab)
      throw ContractError("encode_conditions: phoneme id " + std::to_string(id) +
                          " outside vocabulary of " + std::to_string(cfg.vocab));
  }
  if (speaker >= cfg.speakers)
    throw ContractError("encode_conditions: speaker " + std::to_string(speaker) +
                        " outside " + std::to_string(cfg.speakers) + " speakers");

  Encoded<T> enc;
  const Tensor<T> emb = embedding(ps.get("enc.phone_emb"), in.ids);
  Tensor<T> h = emb;
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    const std::string name = layer("enc.conv", l);
    if (l > 0) h = gelu(h);
    h = conv1d(h, ps.get(name + ".w"), ps.get(name + ".b"));
  }
  // Residual around the stack keeps phoneme identity on the same scale as
  // the other tiers' embeddings.
  h = add(h, emb);
  enc.tiers[0] = h;
  Tensor<T> sum_h = h;
  if (cfg.use_syll) {
    // Averaged rather than summed so the tier enters at the phoneme scale.
    const Tensor<T> s =
        scale(add(add(embedding(ps.get("enc.syll_pos"), in.syll_pos),
                      embedding(ps.get("enc.morph"), in.morph)),
                  embedding(ps.get("enc.word_init"), in.word_init)),
              T(1) / T(3));
    enc.tiers[1] = s;
    sum_h = add(sum_h, s);
  }
  if (cfg.use_pros) {
    std::vector<T> feats(in.prosody.begin(), in.prosody.end());
    const Tensor<T> p = linear(
        ps, "enc.pros", Tensor<T>::from({n, kProsodyFeatures}, std::move(feats)));
    enc.tiers[2] = p;
    sum_h = add(sum_h, p);
  }
  const std::int32_t spk = static_cast<std::int32_t>(speaker);
  const Tensor<T> s =
      linear(ps, "enc.spk_proj",
             embedding(ps.get("enc.spk_emb"), std::span<const std::int32_t>(&spk, 1)));
  sum_h = add(sum_h, s);
  enc.out = linear(ps, "enc.out", sum_h);
  return enc;
}

// ---------------------------------------------------------------------------
// Duration

template <typename T>
Tensor<T> duration_log_frames(const Model<T>& m, const Tensor<T>& cond) {
  const ModelConfig& cfg = m.cfg;
  const ParamSet<T>& ps = m.params;
  if (cond.rank() != 2 || cond.dim(0) == 0 || cond.dim(1) != cfg.dit_hidden)
    throw DimensionError("duration predictor: cond " + shape_str(cond.shape()));
  const std::size_t n = cond.dim(0), H = cfg.dur_hidden;
  Tensor<T> seq = cond.detach();
  Tensor<T> h;
  for (std::size_t l = 0; l < cfg.dur_layers; ++l) {
    const std::string name = layer("dur.lstm", l);
    const Tensor<T> xw = add(matmul(seq, ps.get(name + ".wx")), ps.get(name + ".b"));
    const Tensor<T>& wh = ps.get(name + ".wh");
    h = Tensor<T>::zeros({1, H});
    Tensor<T> c = Tensor<T>::zeros({1, H});
    std::vector<Tensor<T>> outs;
    outs.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
      const Tensor<T> g = add(slice(xw, 0, t, t + 1), matmul(h, wh));
      const Tensor<T> i = sigmoid(slice(g, 1, 0, H));
      const Tensor<T> f = sigmoid(slice(g, 1, H, 2 * H));
      const Tensor<T> u = tanh(slice(g, 1, 2 * H, 3 * H));
      const Tensor<T> o = sigmoid(slice(g, 1, 3 * H, 4 * H));
      c = add(mul(f, c), mul(i, u));
      h = mul(o, tanh(c));
      outs.push_back(h);
    }
    if (l + 1 < cfg.dur_layers) seq = n == 1 ? outs[0] : concat(outs, 0);
  }
  // log frames = log(tokens) + head(h): the head learns a per-token rate.
  return add_scalar(linear(ps, "dur.head", h),
                    static_cast<T>(std::log(static_cast<double>(n))));
}

std::size_t decode_duration(double log_frames, std::size_t tokens) {
  if (tokens == 0) throw ContractError("decode_duration: no tokens");
  const double lo = static_cast<double>(tokens);
  const double hi = 200.0 * lo;
  if (std::isnan(log_frames)) throw NumericError("duration prediction is NaN");
  const double frames = std::round(std::exp(std::min(log_frames, 50.0)));
  return static_cast<std::size_t>(std::clamp(frames, lo, hi));
}

template <typename T>
std::size_t predict_duration(const Model<T>& m, const Tensor<T>& cond) {
  NoGradGuard guard;
  return decode_duration(static_cast<double>(duration_log_frames(m, cond).item()),
                         cond.dim(0));
}

// ---------------------------------------------------------------------------
// Field

template <typename T>
Tensor<T> forward_field(const Model<T>& m, const Tensor<T>& x_t, double t,
                        const Tensor<T>& cond, RunContext<T>& ctx, Tensor<T>* hidden) {
  const ModelConfig& cfg = m.cfg;
  const ParamSet<T>& ps = m.params;
  const std::size_t d = cfg.dit_hidden;
  if (x_t.rank() != 2 || x_t.dim(0) == 0 || x_t.dim(1) != cfg.mel_bins)
    throw DimensionError("forward_field: x_t " + shape_str(x_t.shape()) +
                         " needs " + std::to_string(cfg.mel_bins) + " bins");
  if (cond.rank() != 2 || cond.dim(0) == 0 || cond.dim(1) != d)
    throw DimensionError("forward_field: cond " + shape_str(cond.shape()));
  if (!(t >= 0.0 && t <= 1.0))
    throw ContractError("forward_field: t=" + std::to_string(t) + " outside [0, 1]");
  for (T v : x_t.data())
    if (!std::isfinite(v)) throw NumericError("forward_field: non-finite x_t");

  const std::size_t frames = x_t.dim(0);
  // Stacked small-std projections leave the encoding far below the scale
  // of the frame features; normalizing it makes it visible from step one.
  const Tensor<T> cond_n = layer_norm(ps, "field.cond_ln", cond);
  const double tt = kTimeScale * t;
  const Tensor<T> temb = linear(
      ps, "field.time2",
      gelu(linear(ps, "field.time1",
                  sinusoidal_encoding<T>(std::span<const double>(&tt, 1), d))));
  // The text is also stretched uniformly over the frames. This uses the
  // total length only, so the alignment itself is still learned.
  std::vector<std::int32_t> stretch(frames);
  for (std::size_t f = 0; f < frames; ++f)
    stretch[f] = static_cast<std::int32_t>((2 * f + 1) * cond.dim(0) / (2 * frames));
  Tensor<T> audio = add(add(add(linear(ps, "field.mel_in", x_t), positions<T>(frames, d)),
                            embedding(cond_n, stretch)),
                        temb);
  const Tensor<T> text = add(cond_n, positions<T>(cond.dim(0), d));

  const AttentionConfig acfg = cfg.attention();
  const AlignedPair<T> aligned = cross_modal_align(ps, "field.cma", text, audio, acfg, ctx);
  const Tensor<T> c =
      gelu(add(temb, linear(ps, "field.cond_pool", mean_axis(aligned.text, 0))));

  Tensor<T> x = aligned.audio;
  for (std::size_t l = 0; l < cfg.dit_layers; ++l) {
    const std::string n = layer("field.dit", l);
    const Tensor<T> mod = linear(ps, n + ".ada", c);
    auto part = [&](std::size_t k) { return slice(mod, 1, k * d, (k + 1) * d); };
    const Tensor<T> y1 = add(mul(layer_norm(x), add_scalar(part(1), T(1))), part(0));
    x = add(x, mul(multi_head_attention(ps, n + ".attn", y1, y1, y1, acfg, ctx), part(2)));
    const Tensor<T> y2 = add(mul(layer_norm(x), add_scalar(part(4), T(1))), part(3));
    const Tensor<T> ff = linear(
        ps, n + ".ff2",
        dropout(gelu(linear(ps, n + ".ff1", y2)), cfg.ff_dropout, ctx.training, ctx.rng));
    x = add(x, mul(ff, part(5)));
  }
  // Time-gated skip from x_t: the optimal field is affine in x_t with a
  // t-dependent slope, which the deep path learns slowly.
  const Tensor<T> h = layer_norm(ps, "field.final_ln", x);
  if (hidden) *hidden = h;
  return add(linear(ps, "field.out", h), mul(x_t, linear(ps, "field.skip", temb)));
}

// ---------------------------------------------------------------------------
// Contrastive embeddings

template <typename T>
Tensor<T> speech_embedding(const Model<T>& m, const Tensor<T>& hidden, Tier tier) {
  if (hidden.rank() != 2 || hidden.dim(1) != m.cfg.dit_hidden)
    throw DimensionError("speech_embedding: hidden " + shape_str(hidden.shape()));
  const Tensor<T> pooled = mean_axis(hidden, 0);
  return linear(m.params,
                std::string("hca.x.") + kTierNames[static_cast<std::size_t>(tier)],
                pooled);
}

template <typename T>
Tensor<T> condition_embedding(const Model<T>& m, const Encoded<T>& enc, Tier tier) {
  const std::size_t k = static_cast<std::size_t>(tier);
  if (!enc.tiers[k].defined())
    throw ContractError(std::string("condition tier '") + kTierNames[k] + "' is masked");
  // Tiers nest: a level's condition is its own contribution on top of every
  // active level below it, so each pooled condition still tells sentences
  // apart.
  Tensor<T> nested = enc.tiers[k];
  for (std::size_t j = 0; j < k; ++j)
    if (enc.tiers[j].defined()) nested = add(nested, enc.tiers[j]);
  return linear(m.params, std::string("hca.c.") + kTierNames[k], mean_axis(nested, 0));
}

std::array<bool, kTierCount> active_tiers(const ModelConfig& cfg,
                                          const HcaConfig& hca) {
  return {hca.lambdas[0] > 0, cfg.use_syll && hca.lambdas[1] > 0,
          cfg.use_pros && hca.lambdas[2] > 0};
}

// ---------------------------------------------------------------------------
// Synthesis

MelSpectrogram synthesize(const Model<float>& m, const Frontend& fe,
                          const SynthesisRequest& req, const OdeConfig& ode) {
  ode.validate();
  if (req.ref_mel.has_value() != req.ref_text.has_value())
    throw ContractError("synthesize: reference mel and reference text go together");
  NoGradGuard guard;
  RunContext<float> ctx;
  const CondInput tgt = cond_input(fe.build(req.text));
  const Encoded<float> tgt_enc = encode_conditions(m, tgt, req.speaker, ctx);
  const std::size_t frames = req.frames ? *req.frames : predict_duration(m, tgt_enc.out);
  if (frames == 0) throw ContractError("synthesize: zero output frames");
  const std::size_t bins = m.cfg.mel_bins;

  Tensor<float> cond = tgt_enc.out;
  Tensor<float> prefix;
  if (req.ref_mel) {
    const MelSpectrogram& ref = *req.ref_mel;
    if (ref.bins != bins || ref.frames == 0 || ref.data.size() != ref.frames * bins)
      throw ContractError("synthesize: reference mel has " + std::to_string(ref.bins) +
                          " bins, model expects " + std::to_string(bins));
    const CondInput joined = join_reference(cond_input(fe.build(*req.ref_text)), tgt);
    cond = encode_conditions(m, joined, req.speaker, ctx).out;
    std::vector<float> ref_data(ref.data.begin(), ref.data.end());
    prefix = Tensor<float>::from({ref.frames, bins}, ref_data);
  }
  const Field<float> field = [&](const Tensor<float>& x, double t) {
    if (!prefix.defined()) return forward_field(m, x, t, cond, ctx);
    const std::size_t pf = prefix.dim(0);
    const Tensor<float> v = forward_field(m, concat<float>({prefix, x}, 0), t, cond, ctx);
    return slice(v, 0, pf, pf + x.dim(0));
  };
  const Tensor<float> out = sample_ode(field, {frames, bins}, ode);
  MelSpectrogram mel;
  mel.frames = frames;
  mel.bins = bins;
  mel.cfg.bins = bins;
  mel.data.assign(out.data().begin(), out.data().end());
  return mel;
}

#define MFTTS_INSTANTIATE_MODEL(T)                                             \
  template struct Model<T>;                                                    \
  template Encoded<T> encode_conditions<T>(const Model<T>&, const CondInput&,  \
                                           std::size_t, RunContext<T>&);       \
  template Tensor<T> duration_log_frames<T>(const Model<T>&, const Tensor<T>&); \
  template std::size_t predict_duration<T>(const Model<T>&, const Tensor<T>&); \
  template Tensor<T> forward_field<T>(const Model<T>&, const Tensor<T>&,       \
                                      double, const Tensor<T>&,                \
                                      RunContext<T>&, Tensor<T>*);             \
  template Tensor<T> speech_embedding<T>(const Model<T>&, const Tensor<T>&,    \
                                         Tier);                                \
  template Tensor<T> condition_embedding<T>(const Model<T>&,                   \
                                            const Encoded<T>&, Tier);

MFTTS_INSTANTIATE_MODEL(float)
MFTTS_INSTANTIATE_MODEL(double)

}  // namespace mftts
