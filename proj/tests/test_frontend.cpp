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

#include <string>
#include <vector>

#include "doctest.h"
#include "mftts/error.hpp"
#include "mftts/frontend.hpp"
#include "mftts/random.hpp"

using namespace mftts;

namespace {

const Frontend& fe() { return Frontend::builtin(); }

std::vector<std::string> ipa_of(const PhonemeSeq& p) {
  std::vector<std::string> out;
  for (auto id : p.ids) out.push_back(fe().g2p().symbol(id).ipa);
  return out;
}

std::string roman_of(const PhonemeSeq& p, Span s) {
  std::string out;
  for (std::size_t i = s.begin; i < s.end; ++i) out += p.graphemes[i];
  return out;
}

// Root plus an optional suffix, both drawn from the shipped tables.
std::string random_word(Rng& rng, std::string* root_out = nullptr) {
  const auto& roots = RootLexicon::builtin().entries();
  const auto& sufs = fe().suffixes().entries();
  const std::string root = roots[rng.below(roots.size())].first;
  if (root_out) *root_out = root;
  if (rng.below(3) == 0) return root;
  return root + sufs[rng.below(sufs.size())].first;
}

}  // namespace

TEST_CASE("romanize: ama") {
  const PhonemeSeq p = fe().romanize_to_phonemes("ama");
  CHECK(ipa_of(p) == std::vector<std::string>{"a", "m", "a"});
  CHECK(p.classes == std::vector<VowelClass>{VowelClass::kBack,
                                             VowelClass::kConsonant,
                                             VowelClass::kBack});
}

TEST_CASE("romanize: empty and digraph-free sunggi") {
  CHECK(fe().romanize_to_phonemes("").empty());
  const PhonemeSeq p = fe().romanize_to_phonemes("šunggi");
  CHECK(p.size() == 6);
  CHECK(ipa_of(p) == std::vector<std::string>{"ʃ", "u", "n", "k", "k", "i"});
}

TEST_CASE("romanize: longest match resolves digraphs first") {
  const PhonemeSeq p = fe().romanize_to_phonemes("tsa");
  REQUIRE(p.size() == 2);
  CHECK(ipa_of(p)[0] == "tsʰ");
}

TEST_CASE("romanize: unknown character reports byte offset") {
  try {
    fe().romanize_to_phonemes("ama xe");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
  // Multi-byte characters before the bad one shift the byte offset.
  try {
    fe().romanize_to_phonemes("šq");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 2);
  }
}

TEST_CASE("decompose: root and suffix goldens") {
  auto check = [](const char* word, const char* root, const char* suffix) {
    const SyllableStructure s = fe().decompose_morphology(word);
    INFO(word);
    REQUIRE(!s.morphemes.empty());
    CHECK(s.morphemes[0].kind == MorphKind::kRoot);
    CHECK(s.morphemes[0].text == root);
    if (suffix) {
      REQUIRE(s.morphemes.size() == 2);
      CHECK(s.morphemes[1].kind == MorphKind::kSuffix);
      CHECK(s.morphemes[1].text == suffix);
    } else {
      CHECK(s.morphemes.size() == 1);
    }
  };
  check("šunggira", "šunggi", "ra");
  check("ama", "ama", nullptr);
  check("booi", "boo", "i");
  check("alambi", "ala", "mbi");
  check("jihe", "ji", "he");
}

TEST_CASE("decompose: syllables of sunggi") {
  const SyllableStructure s = fe().decompose_morphology("šunggi");
  REQUIRE(s.syllables.size() == 2);
  CHECK(s.syllables[0] == Span{0, 4});
  CHECK(s.syllables[1] == Span{4, 6});
}

TEST_CASE("prosody: punctuation and particles") {
  const ProsodyAnnotation d = fe().analyze_prosody("ama jihe.");
  CHECK(d.type == SentenceType::kDeclarative);
  REQUIRE(d.boundaries.size() == 2);
  CHECK(d.boundaries.back() == Boundary::kMajor);
  CHECK(d.boundaries.front() == Boundary::kNone);

  CHECK(fe().analyze_prosody("ama jihe?").type == SentenceType::kInterrogative);

  const ProsodyAnnotation g = fe().analyze_prosody("ama i boo");
  REQUIRE(g.prominence.size() == 3);
  CHECK(g.prominence[1] <= 0.3f);
  CHECK(g.prominence[0] >= 0.5f);
  CHECK(g.prominence[2] >= 0.5f);
}

TEST_CASE("prosody: all six sentence types reachable") {
  CHECK(fe().analyze_prosody("ama jihe.").type == SentenceType::kDeclarative);
  CHECK(fe().analyze_prosody("ama jihe ni").type ==
        SentenceType::kInterrogative);
  CHECK(fe().analyze_prosody("tuwa!").type == SentenceType::kImperative);
  CHECK(fe().analyze_prosody("tuwaki!").type == SentenceType::kImperative);
  CHECK(fe().analyze_prosody("ama jihe!").type == SentenceType::kExclamative);
  CHECK(fe().analyze_prosody("ama jifi").type == SentenceType::kContinuative);
  CHECK(fe().analyze_prosody("ama kai.").type == SentenceType::kEmphatic);
}

TEST_CASE("prosody: comma gives a minor boundary") {
  const ProsodyAnnotation p = fe().analyze_prosody("ama jifi, boo genehe.");
  REQUIRE(p.boundaries.size() == 4);
  CHECK(p.boundaries[1] == Boundary::kMinor);
  CHECK(p.boundaries[3] == Boundary::kMajor);
}

TEST_CASE("build: composed goldens") {
  const HierarchicalText q = fe().build("šunggira?");
  CHECK(q.pros.type == SentenceType::kInterrogative);
  CHECK_NOTHROW(validate(q, fe().g2p()));
  CHECK(q.syll.morphemes.size() == 2);

  const HierarchicalText a = fe().build("ama");
  CHECK(a.pros.words.size() == 1);
  CHECK(a.syll.syllables.size() == 2);
  CHECK(a.pros.type == SentenceType::kDeclarative);

  CHECK_THROWS_AS(fe().build(""), ContractError);
  CHECK_THROWS_AS(fe().build("   "), ContractError);
  CHECK_THROWS_AS(fe().build("ama q"), ParseError);
}

TEST_CASE("build: multi-word indices are global") {
  const HierarchicalText ht = fe().build("ama booi bithe.");
  CHECK(ht.syll.word_starts == std::vector<std::size_t>{0, 3, 7});
  CHECK(ht.syll.morphemes[1].text == "boo");
  CHECK(ht.syll.morphemes[1].span == Span{3, 6});
  CHECK(ht.syll.morphemes[2].kind == MorphKind::kSuffix);
}

TEST_CASE("property: round trip, partition and root recovery on 500 words") {
  Rng rng(2024);
  for (int n = 0; n < 500; ++n) {
    std::string root;
    const std::string word = random_word(rng, &root);
    INFO(word);
    const HierarchicalText ht = fe().build(word);
    std::string joined;
    for (const Span& s : ht.syll.syllables) joined += roman_of(ht.phon, s);
    CHECK(joined == word);
    std::size_t at = 0;
    for (const Span& s : ht.syll.syllables) {
      CHECK(s.begin == at);
      CHECK(s.end > s.begin);
      at = s.end;
    }
    CHECK(at == ht.phon.size());
    CHECK(ht.syll.morphemes.front().text == root);
  }
}

TEST_CASE("property: partition over random lexicon concatenations") {
  Rng rng(7);
  for (int n = 0; n < 200; ++n) {
    std::string text;
    const std::size_t words = 1 + rng.below(5);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += random_word(rng);
    }
    INFO(text);
    const HierarchicalText ht = fe().build(text);
    CHECK_NOTHROW(validate(ht, fe().g2p()));
    CHECK(ht.syll.word_starts.size() == words);
    std::string joined;
    for (const auto& m : ht.syll.morphemes) joined += m.text;
    std::string squashed;
    for (char c : text)
      if (c != ' ') squashed += c;
    CHECK(joined == squashed);
  }
}

TEST_CASE("vowel harmony violations are warnings") {
  CHECK(fe().build("ama bithe").warnings.empty());
  const HierarchicalText ht = fe().build("aleme");
  REQUIRE(ht.warnings.size() == 1);
  CHECK(ht.warnings[0].find("ale") != std::string::npos);
}

TEST_CASE("determinism: identical input gives identical output") {
  const std::string a = to_json(fe().build("ama jihe, booi bithe?"), fe().g2p());
  const std::string b = to_json(fe().build("ama jihe, booi bithe?"), fe().g2p());
  CHECK(a == b);
  CHECK(a.find("\"interrogative\"") != std::string::npos);
}

TEST_CASE("validate catches broken tiers") {
  HierarchicalText ht = fe().build("ama jihe");
  ht.syll.syllables.back().end -= 1;
  CHECK_THROWS_AS(validate(ht, fe().g2p()), ContractError);
  ht = fe().build("ama jihe");
  ht.pros.prominence[0] = 1.5f;
  CHECK_THROWS_AS(validate(ht, fe().g2p()), ContractError);
}

TEST_CASE("table parsing rejects malformed rows") {
  CHECK_THROWS_AS(G2PTable::parse("a\n"), ConfigError);
  CHECK_THROWS_AS(G2PTable::parse("a\ta\tbogus\n"), ConfigError);
  CHECK_THROWS_AS(G2PTable::parse("# nothing\n"), ConfigError);
  const G2PTable t = G2PTable::parse("# c\na\ta\tback\nb\tp\n");
  CHECK(t.inventory_size() == 4);
  CHECK(t.symbol(kFirstPhonemeId).vowel_class == VowelClass::kBack);
  CHECK(t.symbol(kFirstPhonemeId + 1).vowel_class == VowelClass::kConsonant);
}
