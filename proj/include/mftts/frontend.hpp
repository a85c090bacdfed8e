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

// Romanized Manchu text frontend. Produces three aligned tiers over one
// phoneme sequence: phonemes (IPA ids with vowel classes), syllable and
// root/suffix structure, and sentence-level prosody.
//
// All linguistic knowledge lives in the data tables (data/*.tsv); the
// defaults are compiled in, and alternative tables can be loaded from disk.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mftts {

enum class VowelClass : std::uint8_t { kBack, kFront, kNeutral, kConsonant };

std::string_view to_string(VowelClass c);

struct PhonemeSymbol {
  std::string roman;
  std::string ipa;
  VowelClass vowel_class = VowelClass::kConsonant;
  std::int32_t id = 0;
};

// Reserved ids ahead of the table entries.
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kSeparatorId = 1;
inline constexpr std::int32_t kFirstPhonemeId = 2;

// `romanized<TAB>ipa[<TAB>class]` lines; `#` starts a comment.
class G2PTable {
 public:
  static G2PTable parse(std::string_view text);
  static G2PTable load(const std::filesystem::path& path);
  static const G2PTable& builtin();

  // Ids span [0, inventory_size()); the first two are reserved.
  std::size_t inventory_size() const {
    return symbols_.size() + kFirstPhonemeId;
  }
  const PhonemeSymbol& symbol(std::int32_t id) const;

  // Longest romanized entry matching `text` at byte `pos`.
  const PhonemeSymbol* match(std::string_view text, std::size_t pos,
                             std::size_t* length) const;

 private:
  std::vector<PhonemeSymbol> symbols_;  // index = id - kFirstPhonemeId
  std::size_t max_key_bytes_ = 0;
  std::map<std::string, std::size_t, std::less<>> by_roman_;
};

// `suffix<TAB>tag` lines.
class SuffixLexicon {
 public:
  static SuffixLexicon parse(std::string_view text);
  static SuffixLexicon load(const std::filesystem::path& path);
  static const SuffixLexicon& builtin();

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }
  // Tag of `suffix`, if listed.
  std::optional<std::string> tag(std::string_view suffix) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// `word<TAB>role` lines.
class ParticleList {
 public:
  static ParticleList parse(std::string_view text);
  static ParticleList load(const std::filesystem::path& path);
  static const ParticleList& builtin();

  std::optional<std::string> role(std::string_view word) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// `root<TAB>pos` lines (pos is noun or verb); feeds the corpus grammar.
class RootLexicon {
 public:
  static RootLexicon parse(std::string_view text);
  static RootLexicon load(const std::filesystem::path& path);
  static const RootLexicon& builtin();

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct PhonemeSeq {
  std::vector<std::int32_t> ids;
  std::vector<VowelClass> classes;
  std::vector<std::string> graphemes;  // romanized source of each phoneme

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

// Half-open phoneme index range.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

enum class MorphKind : std::uint8_t { kRoot, kSuffix };

struct Morpheme {
  Span span;
  MorphKind kind = MorphKind::kRoot;
  std::string text;
};

struct SyllableStructure {
  std::vector<Span> syllables;
  std::vector<Morpheme> morphemes;
  std::vector<std::size_t> word_starts;  // phoneme index of each word
};

inline constexpr std::size_t kSentenceTypeCount = 6;

// Stand-in set of six intonation classes.
enum class SentenceType : std::uint8_t {
  kDeclarative,
  kInterrogative,
  kImperative,
  kExclamative,
  kContinuative,
  kEmphatic,
};

std::string_view to_string(SentenceType t);
std::optional<SentenceType> sentence_type_from_string(std::string_view s);

enum class Boundary : std::uint8_t { kNone, kMinor, kMajor };

std::string_view to_string(Boundary b);

struct ProsodyAnnotation {
  SentenceType type = SentenceType::kDeclarative;
  std::vector<std::string> words;
  std::vector<float> prominence;     // per word, in [0, 1]
  std::vector<Boundary> boundaries;  // after each word
};

inline constexpr float kFunctionWordProminence = 0.2f;
inline constexpr float kContentWordProminence = 0.6f;
inline constexpr float kNuclearProminence = 0.8f;

struct HierarchicalText {
  PhonemeSeq phon;
  SyllableStructure syll;
  ProsodyAnnotation pros;
  std::string source;
  std::vector<std::string> warnings;  // e.g. vowel harmony in a root
};

class Frontend {
 public:
  Frontend(G2PTable g2p, SuffixLexicon suffixes, ParticleList particles);
  static const Frontend& builtin();

  const G2PTable& g2p() const { return g2p_; }
  const SuffixLexicon& suffixes() const { return suffixes_; }
  const ParticleList& particles() const { return particles_; }

  // Letters are transduced; spaces and . ? ! , are skipped. Anything else
  // throws ParseError carrying the byte offset.
  PhonemeSeq romanize_to_phonemes(std::string_view text) const;

  // One word: longest-suffix segmentation and onset-maximizing
  // syllabification. Indices are local to the word.
  SyllableStructure decompose_morphology(std::string_view word) const;

  ProsodyAnnotation analyze_prosody(std::string_view sentence) const;

  // Full three-tier analysis. Throws ContractError on empty text.
  HierarchicalText build(std::string_view text) const;

 private:
  G2PTable g2p_;
  SuffixLexicon suffixes_;
  ParticleList particles_;
};

// Throws ContractError naming the first violated tier invariant.
void validate(const HierarchicalText& ht, const G2PTable& g2p);

// Deterministic JSON rendering of all three tiers.
std::string to_json(const HierarchicalText& ht, const G2PTable& g2p);

// Splits on whitespace; trailing sentence punctuation is dropped from words.
std::vector<std::string> split_words(std::string_view sentence);

}  // namespace mftts
