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

#include "mftts/frontend.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "builtin_tables.hpp"
#include "json.hpp"
#include "mftts/error.hpp"

namespace mftts {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_punct(char c) { return c == '.' || c == '?' || c == '!' || c == ','; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Non-comment, non-blank lines split on tabs, with their 1-based numbers.
std::vector<std::pair<std::size_t, std::vector<std::string>>> table_rows(
    std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::size_t c = 0;
    while (true) {
      const std::size_t tab = line.find('\t', c);
      cols.emplace_back(trim(line.substr(c, tab - c)));
      if (tab == std::string_view::npos) break;
      c = tab + 1;
    }
    rows.emplace_back(line_no, std::move(cols));
  }
  return rows;
}

std::optional<VowelClass> vowel_class_from(std::string_view s) {
  if (s == "back") return VowelClass::kBack;
  if (s == "front") return VowelClass::kFront;
  if (s == "neutral") return VowelClass::kNeutral;
  if (s == "consonant") return VowelClass::kConsonant;
  return std::nullopt;
}

bool is_vowel(VowelClass c) { return c != VowelClass::kConsonant; }

}  // namespace

std::string_view to_string(VowelClass c) {
  switch (c) {
    case VowelClass::kBack: return "back";
    case VowelClass::kFront: return "front";
    case VowelClass::kNeutral: return "neutral";
    case VowelClass::kConsonant: return "consonant";
  }
  return "?";
}

std::string_view to_string(SentenceType t) {
  switch (t) {
    case SentenceType::kDeclarative: return "declarative";
    case SentenceType::kInterrogative: return "interrogative";
    case SentenceType::kImperative: return "imperative";
    case SentenceType::kExclamative: return "exclamative";
    case SentenceType::kContinuative: return "continuative";
    case SentenceType::kEmphatic: return "emphatic";
  }
  return "?";
}

std::optional<SentenceType> sentence_type_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kSentenceTypeCount; ++i) {
    const auto t = static_cast<SentenceType>(i);
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::string_view to_string(Boundary b) {
  switch (b) {
    case Boundary::kNone: return "none";
    case Boundary::kMinor: return "minor";
    case Boundary::kMajor: return "major";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tables

G2PTable G2PTable::parse(std::string_view text) {
  G2PTable table;
  std::map<std::string, std::int32_t> ipa_ids;
  for (auto& [line, cols] : table_rows(text)) {
    if (cols.size() < 2 || cols.size() > 3 || cols[0].empty() ||
        cols[1].empty()) {
      throw ConfigError("g2p table line " + std::to_string(line) +
                        ": expected romanized<TAB>ipa[<TAB>class]");
    }
    if (table.by_roman_.count(cols[0])) {
      throw ConfigError("g2p table line " + std::to_string(line) +
                        ": duplicate entry '" + cols[0] + "'");
    }
    PhonemeSymbol sym;
    sym.roman = cols[0];
    sym.ipa = cols[1];
    if (cols.size() == 3) {
      auto cls = vowel_class_from(cols[2]);
      if (!cls) {
        throw ConfigError("g2p table line " + std::to_string(line) +
                          ": unknown vowel class '" + cols[2] + "'");
      }
      sym.vowel_class = *cls;
    }
    if (ipa_ids.count(sym.ipa)) {
      throw ConfigError("g2p table line " + std::to_string(line) +
                        ": ipa symbol '" + sym.ipa + "' listed twice");
    }
    sym.id = static_cast<std::int32_t>(table.symbols_.size()) + kFirstPhonemeId;
    ipa_ids[sym.ipa] = sym.id;
    table.max_key_bytes_ = std::max(table.max_key_bytes_, sym.roman.size());
    table.by_roman_[sym.roman] = table.symbols_.size();
    table.symbols_.push_back(std::move(sym));
  }
  if (table.symbols_.empty()) throw ConfigError("g2p table is empty");
  if (table.inventory_size() > 1024) {
    throw ConfigError("g2p inventory exceeds 1024 symbols");
  }
  return table;
}

G2PTable G2PTable::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const G2PTable& G2PTable::builtin() {
  static const G2PTable table = parse(detail::kBuiltinG2PTable);
  return table;
}

const PhonemeSymbol& G2PTable::symbol(std::int32_t id) const {
  if (id < kFirstPhonemeId ||
      static_cast<std::size_t>(id) >= inventory_size()) {
    throw ContractError("phoneme id " + std::to_string(id) +
                        " is not a table symbol");
  }
  return symbols_[static_cast<std::size_t>(id - kFirstPhonemeId)];
}

const PhonemeSymbol* G2PTable::match(std::string_view text, std::size_t pos,
                                     std::size_t* length) const {
  const std::size_t avail = text.size() - pos;
  for (std::size_t len = std::min(max_key_bytes_, avail); len > 0; --len) {
    auto it = by_roman_.find(text.substr(pos, len));
    if (it != by_roman_.end()) {
      *length = len;
      return &symbols_[it->second];
    }
  }
  return nullptr;
}

SuffixLexicon SuffixLexicon::parse(std::string_view text) {
  SuffixLexicon lex;
  for (auto& [line, cols] : table_rows(text)) {
    if (cols.empty() || cols.size() > 2 || cols[0].empty()) {
      throw ConfigError("suffix lexicon line " + std::to_string(line) +
                        ": expected suffix[<TAB>tag]");
    }
    lex.entries_.emplace_back(cols[0], cols.size() == 2 ? cols[1] : "");
  }
  // Longest first so the first viable match is the longest one.
  std::stable_sort(lex.entries_.begin(), lex.entries_.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.size() > b.first.size();
                   });
  return lex;
}

SuffixLexicon SuffixLexicon::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const SuffixLexicon& SuffixLexicon::builtin() {
  static const SuffixLexicon lex = parse(detail::kBuiltinSuffixLexicon);
  return lex;
}

std::optional<std::string> SuffixLexicon::tag(std::string_view suffix) const {
  for (const auto& [s, t] : entries_)
    if (s == suffix) return t;
  return std::nullopt;
}

ParticleList ParticleList::parse(std::string_view text) {
  ParticleList list;
  for (auto& [line, cols] : table_rows(text)) {
    if (cols.size() != 2 || cols[0].empty()) {
      throw ConfigError("particle list line " + std::to_string(line) +
                        ": expected word<TAB>role");
    }
    if (cols[1] != "function" && cols[1] != "question" &&
        cols[1] != "emphatic") {
      throw ConfigError("particle list line " + std::to_string(line) +
                        ": unknown role '" + cols[1] + "'");
    }
    list.entries_.emplace_back(cols[0], cols[1]);
  }
  return list;
}

ParticleList ParticleList::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const ParticleList& ParticleList::builtin() {
  static const ParticleList list = parse(detail::kBuiltinParticleList);
  return list;
}

std::optional<std::string> ParticleList::role(std::string_view word) const {
  for (const auto& [w, r] : entries_)
    if (w == word) return r;
  return std::nullopt;
}

RootLexicon RootLexicon::parse(std::string_view text) {
  RootLexicon lex;
  for (auto& [line, cols] : table_rows(text)) {
    if (cols.size() != 2 || cols[0].empty() ||
        (cols[1] != "noun" && cols[1] != "verb")) {
      throw ConfigError("root lexicon line " + std::to_string(line) +
                        ": expected root<TAB>noun|verb");
    }
    lex.entries_.emplace_back(cols[0], cols[1]);
  }
  return lex;
}

RootLexicon RootLexicon::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

const RootLexicon& RootLexicon::builtin() {
  static const RootLexicon lex = parse(detail::kBuiltinRootLexicon);
  return lex;
}

// ---------------------------------------------------------------------------
// Frontend

namespace {

struct WordToken {
  std::string text;
  bool comma_after = false;
  char terminal = 0;  // . ? ! attached after this word
};

std::vector<WordToken> tokenize(std::string_view sentence) {
  std::vector<WordToken> words;
  std::size_t i = 0;
  while (i < sentence.size()) {
    if (is_space(sentence[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < sentence.size() && !is_space(sentence[j]) &&
           !is_punct(sentence[j]))
      ++j;
    if (j > i) words.push_back({std::string(sentence.substr(i, j - i))});
    while (j < sentence.size() && is_punct(sentence[j])) {
      if (!words.empty()) {
        if (sentence[j] == ',') words.back().comma_after = true;
        else words.back().terminal = sentence[j];
      }
      ++j;
    }
    i = j;
  }
  return words;
}

// One consonant of onset at most; every vowel is its own nucleus.
std::vector<Span> syllabify(const std::vector<VowelClass>& classes,
                            std::size_t offset) {
  std::vector<std::size_t> nuclei;
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (is_vowel(classes[i])) nuclei.push_back(i);
  if (nuclei.empty()) return {{offset, offset + classes.size()}};
  std::vector<std::size_t> starts{0};
  for (std::size_t j = 1; j < nuclei.size(); ++j) {
    const bool has_onset = nuclei[j] - nuclei[j - 1] > 1;
    starts.push_back(has_onset ? nuclei[j] - 1 : nuclei[j]);
  }
  std::vector<Span> spans;
  for (std::size_t j = 0; j < starts.size(); ++j) {
    const std::size_t end = j + 1 < starts.size() ? starts[j + 1] : classes.size();
    spans.push_back({offset + starts[j], offset + end});
  }
  return spans;
}

std::string join_graphemes(const PhonemeSeq& p, std::size_t b, std::size_t e) {
  std::string s;
  for (std::size_t i = b; i < e; ++i) s += p.graphemes[i];
  return s;
}

}  // namespace

std::vector<std::string> split_words(std::string_view sentence) {
  std::vector<std::string> out;
  for (auto& w : tokenize(sentence)) out.push_back(std::move(w.text));
  return out;
}

Frontend::Frontend(G2PTable g2p, SuffixLexicon suffixes,
                   ParticleList particles)
    : g2p_(std::move(g2p)),
      suffixes_(std::move(suffixes)),
      particles_(std::move(particles)) {}

const Frontend& Frontend::builtin() {
  static const Frontend fe(G2PTable::builtin(), SuffixLexicon::builtin(),
                           ParticleList::builtin());
  return fe;
}

PhonemeSeq Frontend::romanize_to_phonemes(std::string_view text) const {
  PhonemeSeq seq;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char c = text[pos];
    if (is_space(c) || is_punct(c)) {
      ++pos;
      continue;
    }
    std::size_t len = 0;
    const PhonemeSymbol* sym = g2p_.match(text, pos, &len);
    if (!sym) {
      throw ParseError("unknown character at byte offset " +
                           std::to_string(pos) + " in '" + std::string(text) +
                           "'",
                       pos);
    }
    seq.ids.push_back(sym->id);
    seq.classes.push_back(sym->vowel_class);
    seq.graphemes.push_back(sym->roman);
    pos += len;
  }
  return seq;
}

SyllableStructure Frontend::decompose_morphology(std::string_view word) const {
  for (char c : word) {
    if (is_space(c) || is_punct(c)) {
      throw ContractError("decompose_morphology takes a single word, got '" +
                          std::string(word) + "'");
    }
  }
  const PhonemeSeq phon = romanize_to_phonemes(word);
  if (phon.empty()) throw ContractError("decompose_morphology: empty word");

  // Byte offset where each phoneme starts, plus the end.
  std::vector<std::size_t> cut{0};
  for (const auto& g : phon.graphemes) cut.push_back(cut.back() + g.size());

  std::size_t root_len = phon.size();
  for (const auto& [suffix, tag] : suffixes_.entries()) {
    if (suffix.size() >= word.size() || !word.ends_with(suffix)) continue;
    const std::size_t root_bytes = word.size() - suffix.size();
    const auto at = std::find(cut.begin(), cut.end(), root_bytes);
    if (at == cut.end()) continue;  // suffix would split a phoneme
    const std::size_t r = static_cast<std::size_t>(at - cut.begin());
    // Root phonotactics: two or more phonemes, a vowel, ends in vowel or n.
    if (r < 2) continue;
    if (std::none_of(phon.classes.begin(), phon.classes.begin() + r, is_vowel))
      continue;
    if (!is_vowel(phon.classes[r - 1]) && phon.graphemes[r - 1] != "n") continue;
    root_len = r;
    break;
  }

  SyllableStructure s;
  s.syllables = syllabify(phon.classes, 0);
  s.morphemes.push_back(
      {{0, root_len}, MorphKind::kRoot, join_graphemes(phon, 0, root_len)});
  if (root_len < phon.size()) {
    s.morphemes.push_back({{root_len, phon.size()},
                           MorphKind::kSuffix,
                           join_graphemes(phon, root_len, phon.size())});
  }
  s.word_starts = {0};
  return s;
}

ProsodyAnnotation Frontend::analyze_prosody(std::string_view sentence) const {
  const auto tokens = tokenize(sentence);
  ProsodyAnnotation p;
  if (tokens.empty()) return p;
  const char terminal = tokens.back().terminal;

  std::size_t last_content = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    p.words.push_back(tokens[i].text);
    const bool function_word = particles_.role(tokens[i].text).has_value();
    p.prominence.push_back(function_word ? kFunctionWordProminence
                                         : kContentWordProminence);
    if (!function_word) last_content = i;
    if (i + 1 == tokens.size() || tokens[i].terminal) {
      p.boundaries.push_back(Boundary::kMajor);
    } else if (tokens[i].comma_after) {
      p.boundaries.push_back(Boundary::kMinor);
    } else {
      p.boundaries.push_back(Boundary::kNone);
    }
  }
  if (last_content < tokens.size())
    p.prominence[last_content] = kNuclearProminence;

  const std::string& final_word = tokens.back().text;
  const auto final_role = particles_.role(final_word);
  std::optional<std::string> final_suffix_tag;
  if (!final_role) {
    const auto morph = decompose_morphology(final_word);
    if (morph.morphemes.size() > 1)
      final_suffix_tag = suffixes_.tag(morph.morphemes.back().text);
  }

  if (terminal == '?' || final_role == "question") {
    p.type = SentenceType::kInterrogative;
  } else if (final_role == "emphatic") {
    p.type = SentenceType::kEmphatic;
  } else if (terminal == '!') {
    const bool bare = !final_suffix_tag.has_value() && !final_role;
    p.type = bare || final_suffix_tag == "imperative"
                 ? SentenceType::kImperative
                 : SentenceType::kExclamative;
  } else if (terminal == 0 && final_suffix_tag == "converb") {
    p.type = SentenceType::kContinuative;
  } else {
    p.type = SentenceType::kDeclarative;
  }
  return p;
}

HierarchicalText Frontend::build(std::string_view text) const {
  const std::string_view body = trim(text);
  if (body.empty()) throw ContractError("frontend input is empty");
  // Validates every character with offsets relative to the caller's text.
  romanize_to_phonemes(text);

  HierarchicalText ht;
  ht.source = std::string(text);
  const auto tokens = tokenize(body);
  if (tokens.empty()) {
    throw ContractError("frontend input has no words: '" + std::string(text) +
                        "'");
  }
  for (const auto& tok : tokens) {
    const PhonemeSeq wp = romanize_to_phonemes(tok.text);
    SyllableStructure ws = decompose_morphology(tok.text);
    // Particles are whole words; "kai" must not lose a case suffix "-i".
    if (particles_.role(tok.text))
      ws.morphemes = {{{0, wp.size()}, MorphKind::kRoot, tok.text}};
    const std::size_t off = ht.phon.size();
    ht.syll.word_starts.push_back(off);
    for (const Span& s : ws.syllables)
      ht.syll.syllables.push_back({s.begin + off, s.end + off});
    for (const Morpheme& m : ws.morphemes) {
      ht.syll.morphemes.push_back(
          {{m.span.begin + off, m.span.end + off}, m.kind, m.text});
      if (m.kind != MorphKind::kRoot) continue;
      bool back = false, front = false;
      for (std::size_t i = m.span.begin; i < m.span.end; ++i) {
        back |= wp.classes[i] == VowelClass::kBack;
        front |= wp.classes[i] == VowelClass::kFront;
      }
      if (back && front) {
        ht.warnings.push_back("vowel harmony: root '" + m.text +
                              "' mixes back and front vowels");
      }
    }
    ht.phon.ids.insert(ht.phon.ids.end(), wp.ids.begin(), wp.ids.end());
    ht.phon.classes.insert(ht.phon.classes.end(), wp.classes.begin(),
                           wp.classes.end());
    ht.phon.graphemes.insert(ht.phon.graphemes.end(), wp.graphemes.begin(),
                             wp.graphemes.end());
  }
  ht.pros = analyze_prosody(body);
  validate(ht, g2p_);
  return ht;
}

void validate(const HierarchicalText& ht, const G2PTable& g2p) {
  const std::size_t n = ht.phon.size();
  auto fail = [](const std::string& what) {
    throw ContractError("hierarchical text invariant: " + what);
  };
  if (ht.phon.classes.size() != n || ht.phon.graphemes.size() != n)
    fail("phoneme tier arrays differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sym = g2p.symbol(ht.phon.ids[i]);
    if (sym.vowel_class != ht.phon.classes[i])
      fail("vowel class of phoneme " + std::to_string(i) + " disagrees with table");
  }
  auto check_partition = [&](const std::vector<Span>& spans, const char* tier) {
    std::size_t at = 0;
    for (const Span& s : spans) {
      if (s.begin != at || s.end <= s.begin)
        fail(std::string(tier) + " spans do not partition the phonemes");
      at = s.end;
    }
    if (at != n) fail(std::string(tier) + " spans do not cover the phonemes");
  };
  check_partition(ht.syll.syllables, "syllable");
  std::vector<Span> morph_spans;
  for (const auto& m : ht.syll.morphemes) morph_spans.push_back(m.span);
  check_partition(morph_spans, "morpheme");

  const auto& ws = ht.syll.word_starts;
  if (ws.empty() || ws.front() != 0) fail("word starts must begin at 0");
  for (std::size_t i = 1; i < ws.size(); ++i)
    if (ws[i] <= ws[i - 1] || ws[i] >= n) fail("word starts not increasing");
  auto word_of = [&](std::size_t idx) {
    return static_cast<std::size_t>(
        std::upper_bound(ws.begin(), ws.end(), idx) - ws.begin() - 1);
  };
  for (std::size_t i = 0; i < ht.syll.syllables.size(); ++i) {
    const Span& s = ht.syll.syllables[i];
    if (word_of(s.begin) != word_of(s.end - 1))
      fail("syllable crosses a word boundary");
  }
  for (std::size_t i = 0; i < ht.syll.morphemes.size(); ++i) {
    const auto& m = ht.syll.morphemes[i];
    if (word_of(m.span.begin) != word_of(m.span.end - 1))
      fail("morpheme crosses a word boundary");
    if (m.kind == MorphKind::kSuffix) {
      if (i == 0 || ht.syll.morphemes[i - 1].kind != MorphKind::kRoot ||
          word_of(ht.syll.morphemes[i - 1].span.begin) != word_of(m.span.begin))
        fail("suffix without a preceding root in its word");
    }
  }
  const auto& p = ht.pros;
  if (p.words.size() != ws.size() || p.prominence.size() != ws.size() ||
      p.boundaries.size() != ws.size())
    fail("prosody tier word count differs from the syllable tier");
  for (float v : p.prominence)
    if (!(v >= 0.0f && v <= 1.0f)) fail("prominence outside [0, 1]");
}

std::string to_json(const HierarchicalText& ht, const G2PTable& g2p) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["text"] = ht.source;
  ordered_json phon = ordered_json::array();
  for (std::size_t i = 0; i < ht.phon.size(); ++i) {
    const auto& sym = g2p.symbol(ht.phon.ids[i]);
    phon.push_back({{"id", ht.phon.ids[i]},
                    {"ipa", sym.ipa},
                    {"roman", ht.phon.graphemes[i]},
                    {"class", to_string(ht.phon.classes[i])}});
  }
  j["phonemes"] = std::move(phon);
  ordered_json syl = ordered_json::array();
  for (const auto& s : ht.syll.syllables)
    syl.push_back({{"span", {s.begin, s.end}},
                   {"roman", join_graphemes(ht.phon, s.begin, s.end)}});
  j["syllables"] = std::move(syl);
  ordered_json morph = ordered_json::array();
  for (const auto& m : ht.syll.morphemes)
    morph.push_back({{"span", {m.span.begin, m.span.end}},
                     {"kind", m.kind == MorphKind::kRoot ? "root" : "suffix"},
                     {"roman", m.text}});
  j["morphemes"] = std::move(morph);
  ordered_json words = ordered_json::array();
  for (std::size_t w = 0; w < ht.syll.word_starts.size(); ++w) {
    words.push_back({{"word", ht.pros.words[w]},
                     {"start", ht.syll.word_starts[w]},
                     {"prominence", ht.pros.prominence[w]},
                     {"boundary", to_string(ht.pros.boundaries[w])}});
  }
  j["prosody"] = {{"sentence_type", to_string(ht.pros.type)},
                  {"words", std::move(words)}};
  j["warnings"] = ht.warnings;
  return j.dump(2);
}

}  // namespace mftts
