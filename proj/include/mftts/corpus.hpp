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

// Synthetic training corpus. Texts come from a small pseudo-Manchu grammar
// and each target mel is painted by fixed rules so that every linguistic
// tier leaves its own trace:
//
//   phonemes    a Gaussian band at a hashed mel bin for kFramesPerPhoneme
//               frames each;
//   syllables   syllable-initial bands are louder, suffix bands quieter;
//   prosody     one of six global tilt/contour profiles per sentence type.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mftts/audio.hpp"
#include "mftts/frontend.hpp"
#include "mftts/random.hpp"

namespace mftts {

inline constexpr std::uint32_t kCorpusRuleVersion = 2;
inline constexpr std::size_t kFramesPerPhoneme = 4;

struct CorpusItem {
  std::string text;
  HierarchicalText ht;
  MelSpectrogram mel;  // frames = kFramesPerPhoneme * phonemes
};

struct SyntheticCorpus {
  std::uint64_t seed = 0;
  std::uint32_t rule_version = kCorpusRuleVersion;
  std::size_t bins = 0;
  std::vector<CorpusItem> items;
};

// One sentence of the requested type with roots and suffixes drawn from
// `rng`.
std::string corpus_sentence(SentenceType type, Rng& rng,
                            const RootLexicon& roots = RootLexicon::builtin());

// The rule-rendered target for an analysed text. Values are rounded to
// float so serialized corpora reload bit-exactly.
MelSpectrogram render_target_mel(const HierarchicalText& ht, std::size_t bins);

// Sentence types cycle so every type is present once n >= 6.
SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n,
                                          std::size_t bins,
                                          const Frontend& fe = Frontend::builtin());

// Directory layout: meta.txt, manifest.tsv and mel/<index>.f32.
void save_corpus(const std::filesystem::path& dir, const SyntheticCorpus& c);
SyntheticCorpus load_corpus(const std::filesystem::path& dir,
                            const Frontend& fe = Frontend::builtin());

}  // namespace mftts
