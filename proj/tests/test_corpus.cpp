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

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "doctest.h"
#include "mftts/corpus.hpp"
#include "mftts/error.hpp"

using namespace mftts;

TEST_CASE("grammar yields every intended sentence type and root") {
  const auto& fe = Frontend::builtin();
  std::set<std::string> roots;
  for (const auto& [r, pos] : RootLexicon::builtin().entries()) roots.insert(r);
  Rng rng(1);
  for (int i = 0; i < 600; ++i) {
    const auto type = static_cast<SentenceType>(i % kSentenceTypeCount);
    const std::string text = corpus_sentence(type, rng);
    const auto ht = fe.build(text);
    CHECK_MESSAGE(ht.pros.type == type, text);
    for (const Morpheme& m : ht.syll.morphemes)
      if (m.kind == MorphKind::kRoot && m.text != "kai")
        CHECK_MESSAGE(roots.count(m.text) == 1, text << " root " << m.text);
  }
}

TEST_CASE("same seed gives bit-identical corpora") {
  const auto a = generate_synthetic_corpus(42, 24, 16);
  const auto b = generate_synthetic_corpus(42, 24, 16);
  const auto c = generate_synthetic_corpus(43, 24, 16);
  REQUIRE(a.items.size() == 24);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].text == b.items[i].text);
    CHECK(a.items[i].mel.data == b.items[i].mel.data);
    any_diff |= a.items[i].text != c.items[i].text;
  }
  CHECK(any_diff);
}

TEST_CASE("frames are four per phoneme") {
  const auto c = generate_synthetic_corpus(7, 30, 16);
  for (const auto& it : c.items) {
    CHECK(it.mel.frames == kFramesPerPhoneme * it.ht.phon.size());
    CHECK(it.mel.data.size() == it.mel.frames * 16);
    for (double v : it.mel.data) CHECK(std::isfinite(v));
  }
}

// Every frame sits at this level before the gains apply.
constexpr double kBase = -4.0;

// Gain of phoneme i: 1.2 if it starts a syllable, times 0.8 inside a suffix.
double frame_gain(const HierarchicalText& ht, std::size_t i) {
  double g = 1.0;
  for (const Span& sp : ht.syll.syllables)
    if (sp.begin == i) g *= 1.2;
  for (const Morpheme& m : ht.syll.morphemes)
    if (m.kind == MorphKind::kSuffix && i >= m.span.begin && i < m.span.end) g *= 0.8;
  return g;
}

TEST_CASE("sentence type changes only the global contour") {
  const auto& fe = Frontend::builtin();
  const auto decl = fe.build("ama genembi.");
  auto inter = fe.build("ama genembi?");
  REQUIRE(decl.pros.type == SentenceType::kDeclarative);
  REQUIRE(inter.pros.type == SentenceType::kInterrogative);
  const auto a = render_target_mel(decl, 16), b = render_target_mel(inter, 16);
  REQUIRE(a.frames == b.frames);
  // declarative (tilt -1, slope -1) vs interrogative (slope +1.5): the
  // difference is the tilt and slope terms scaled by the frame gain.
  for (std::size_t f = 0; f < a.frames; ++f) {
    const double u = (f + 0.5) / static_cast<double>(a.frames);
    const double g = frame_gain(decl, f / kFramesPerPhoneme);
    for (std::size_t bin = 0; bin < 16; ++bin) {
      const double pos = bin / 15.0;
      const double expect = g * ((0.0 - -1.0) * (pos - 0.5) + (1.5 - -1.0) * (u - 0.5));
      CHECK(std::abs(b.at(f, bin) - a.at(f, bin) - expect) <= 1e-5);
    }
  }
}

TEST_CASE("syllable and suffix gains scale the whole frame") {
  const auto& fe = Frontend::builtin();
  // max over bins of |(x - base) - ratio * (y - base)|
  auto gain_error = [](const MelSpectrogram& x, const MelSpectrogram& y, std::size_t f,
                       double ratio) {
    double m = 0;
    for (std::size_t bin = 0; bin < x.bins; ++bin)
      m = std::max(m, std::abs((x.at(f, bin) - kBase) - ratio * (y.at(f, bin) - kBase)));
    return m;
  };
  // ama = a|ma; merging the syllables removes the initial gain of m.
  const auto ht = fe.build("ama");
  auto merged = ht;
  merged.syll.syllables = {{0, ht.phon.size()}};
  const auto a = render_target_mel(ht, 16), b = render_target_mel(merged, 16);
  for (std::size_t f = 0; f < a.frames; ++f) {
    CAPTURE(f);
    const bool m_frame = f / kFramesPerPhoneme == 1;
    CHECK(gain_error(a, b, f, m_frame ? 1.2 : 1.0) <= 1e-5);
  }
  CHECK(gain_error(a, b, 4, 1.0) > 0.1);

  // genembi = gene + mbi; the suffix frames lose 20%.
  const auto hs = fe.build("genembi");
  auto unsuffixed = hs;
  unsuffixed.syll.morphemes = {{{0, hs.phon.size()}, MorphKind::kRoot, "genembi"}};
  const auto c = render_target_mel(hs, 16), d = render_target_mel(unsuffixed, 16);
  const std::size_t m = hs.syll.morphemes.back().span.begin;
  for (std::size_t f = 0; f < c.frames; ++f) {
    CAPTURE(f);
    CHECK(gain_error(c, d, f, f / kFramesPerPhoneme < m ? 1.0 : 0.8) <= 1e-5);
  }
}

TEST_CASE("corpus directory round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "mftts_test_corpus";
  std::filesystem::remove_all(dir);
  const auto c = generate_synthetic_corpus(9, 12, 16);
  save_corpus(dir, c);
  const auto r = load_corpus(dir);
  CHECK(r.seed == 9);
  CHECK(r.rule_version == kCorpusRuleVersion);
  REQUIRE(r.items.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(r.items[i].text == c.items[i].text);
    CHECK(r.items[i].mel.data == c.items[i].mel.data);
    CHECK(r.items[i].ht.phon.ids == c.items[i].ht.phon.ids);
  }
  std::filesystem::remove(dir / "mel" / "3.f32");
  CHECK_THROWS_AS(load_corpus(dir), IoError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_corpus(dir), IoError);
}
