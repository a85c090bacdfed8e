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

#include "mftts/corpus.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mftts/config.hpp"
#include "mftts/error.hpp"
#include "mftts/random.hpp"

namespace mftts {

namespace {

constexpr double kBaseLevel = -4.0;
constexpr double kBandAmplitude = 3.0;
constexpr double kBandWidth = 1.0;  // standard deviation in bins
constexpr double kSyllableInitialGain = 1.2;
constexpr double kSuffixGain = 0.8;

// Per sentence type: spectral tilt, linear contour over the utterance and a
// mid-utterance bump.
struct Contour {
  double tilt, slope, bump;
};
constexpr std::array<Contour, kSentenceTypeCount> kContours{{
    {-1.0, -1.0, 0.0},  // declarative: falling
    {0.0, 1.5, 0.0},    // interrogative: rising
    {1.0, -0.5, 0.5},   // imperative
    {0.5, 0.0, 1.0},    // exclamative: raised middle
    {-0.5, 0.5, -0.5},  // continuative: level-rising, dipped middle
    {1.5, -1.5, 0.0},   // emphatic: steep fall, bright
}};

const std::array<const char*, 5> kTenseSuffixes{"mbi", "mbihe", "ra", "ha", "habi"};
const std::array<const char*, 2> kImperativeSuffixes{"ki", "kini"};
const std::array<const char*, 2> kConverbSuffixes{"fi", "me"};

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <std::size_t N>
const char* pick(const std::array<const char*, N>& options, Rng& rng) {
  return options[rng.below(N)];
}

std::string pick_root(const RootLexicon& roots, const std::string& pos, Rng& rng) {
  std::vector<std::string> matches;
  for (const auto& [root, p] : roots.entries())
    if (p == pos) matches.push_back(root);
  if (matches.empty()) throw ContractError("root lexicon has no " + pos + " entries");
  return matches[rng.below(matches.size())];
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

std::string corpus_sentence(SentenceType type, Rng& rng, const RootLexicon& roots) {
  const std::string noun = pick_root(roots, "noun", rng);
  const std::string verb = pick_root(roots, "verb", rng);
  switch (type) {
    case SentenceType::kDeclarative:
      return noun + " " + verb + pick(kTenseSuffixes, rng) + ".";
    case SentenceType::kInterrogative:
      return noun + " " + verb + pick(kTenseSuffixes, rng) + "?";
    case SentenceType::kImperative:
      return verb + pick(kImperativeSuffixes, rng) + "!";
    case SentenceType::kExclamative:
      return noun + " " + verb + pick(kTenseSuffixes, rng) + "!";
    case SentenceType::kContinuative:
      return noun + " " + verb + pick(kConverbSuffixes, rng);
    case SentenceType::kEmphatic:
      return noun + " " + verb + pick(kTenseSuffixes, rng) + " kai.";
  }
  throw ContractError("unknown sentence type");
}

MelSpectrogram render_target_mel(const HierarchicalText& ht, std::size_t bins) {
  if (bins == 0) throw ContractError("render_target_mel: bins must be >= 1");
  const std::size_t P = ht.phon.size();
  if (P == 0) throw ContractError("render_target_mel: no phonemes");
  std::vector<bool> initial(P, false), suffix(P, false);
  for (const Span& s : ht.syll.syllables) initial[s.begin] = true;
  for (const Morpheme& m : ht.syll.morphemes)
    if (m.kind == MorphKind::kSuffix)
      for (std::size_t i = m.span.begin; i < m.span.end; ++i) suffix[i] = true;

  MelSpectrogram mel;
  mel.frames = kFramesPerPhoneme * P;
  mel.bins = bins;
  mel.cfg.bins = bins;
  mel.data.assign(mel.frames * bins, 0.0);
  const Contour& k = kContours[static_cast<std::size_t>(ht.pros.type)];
  for (std::size_t f = 0; f < mel.frames; ++f) {
    const std::size_t i = f / kFramesPerPhoneme;
    const double u = (static_cast<double>(f) + 0.5) / static_cast<double>(mel.frames);
    const double centre = static_cast<double>(
        splitmix64(static_cast<std::uint64_t>(ht.phon.ids[i])) % bins);
    // The gains scale the whole frame above the base level.
    double gain = 1.0;
    if (initial[i]) gain *= kSyllableInitialGain;
    if (suffix[i]) gain *= kSuffixGain;
    for (std::size_t b = 0; b < bins; ++b) {
      const double pos = bins > 1 ? static_cast<double>(b) / static_cast<double>(bins - 1) : 0.5;
      const double z = (static_cast<double>(b) - centre) / kBandWidth;
      const double v = kBaseLevel + gain * (kBandAmplitude * std::exp(-0.5 * z * z) +
                                            k.tilt * (pos - 0.5) + k.slope * (u - 0.5) +
                                            k.bump * std::sin(std::numbers::pi * u));
      mel.data[f * bins + b] = static_cast<float>(v);
    }
  }
  return mel;
}

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n,
                                          std::size_t bins, const Frontend& fe) {
  if (n == 0) throw ContractError("corpus needs at least one item");
  SyntheticCorpus c;
  c.seed = seed;
  c.bins = bins;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto type = static_cast<SentenceType>(i % kSentenceTypeCount);
    CorpusItem item;
    item.text = corpus_sentence(type, rng);
    item.ht = fe.build(item.text);
    if (item.ht.pros.type != type)
      throw ContractError("corpus grammar produced '" + item.text + "' analysed as " +
                          std::string(to_string(item.ht.pros.type)) + ", wanted " +
                          std::string(to_string(type)));
    item.mel = render_target_mel(item.ht, bins);
    c.items.push_back(std::move(item));
  }
  return c;
}

void save_corpus(const std::filesystem::path& dir, const SyntheticCorpus& c) {
  std::filesystem::create_directories(dir / "mel");
  {
    ConfigMap meta;
    meta.set("seed", std::to_string(c.seed));
    meta.set("rule_version", std::to_string(c.rule_version));
    meta.set("bins", std::to_string(c.bins));
    meta.set("items", std::to_string(c.items.size()));
    std::ofstream f(dir / "meta.txt", std::ios::trunc);
    f << meta.to_text();
    if (!f) throw IoError("cannot write " + (dir / "meta.txt").string());
  }
  std::ofstream manifest(dir / "manifest.tsv", std::ios::trunc);
  manifest << "# index\tframes\ttext\n";
  for (std::size_t i = 0; i < c.items.size(); ++i) {
    const CorpusItem& it = c.items[i];
    manifest << i << '\t' << it.mel.frames << '\t' << it.text << '\n';
    write_f32(dir / "mel" / (std::to_string(i) + ".f32"), it.mel.data);
  }
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.tsv").string());
}

SyntheticCorpus load_corpus(const std::filesystem::path& dir, const Frontend& fe) {
  ConfigMap meta = ConfigMap::load(dir / "meta.txt");
  SyntheticCorpus c;
  c.seed = static_cast<std::uint64_t>(meta.get_int("seed", 0));
  c.rule_version = static_cast<std::uint32_t>(meta.get_size("rule_version", 0));
  c.bins = meta.get_size("bins", 0);
  const std::size_t n = meta.get_size("items", 0);
  meta.require_all_used();
  if (c.rule_version != kCorpusRuleVersion)
    throw IoError("corpus rule version " + std::to_string(c.rule_version) +
                  " is not supported (expected " + std::to_string(kCorpusRuleVersion) + ")");
  if (c.bins == 0) throw IoError("corpus meta.txt has no bins");

  std::istringstream manifest(read_text(dir / "manifest.tsv"));
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t'), t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw IoError("malformed manifest line: " + line);
    const std::size_t index = std::stoul(line.substr(0, t1));
    const std::size_t frames = std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
    if (index != c.items.size()) throw IoError("manifest indices are not consecutive");
    CorpusItem it;
    it.text = line.substr(t2 + 1);
    it.ht = fe.build(it.text);
    const Waveform raw = read_f32(dir / "mel" / (std::to_string(index) + ".f32"), 0.0);
    if (raw.samples.size() != frames * c.bins || frames != kFramesPerPhoneme * it.ht.phon.size())
      throw IoError("corpus item " + std::to_string(index) + " has inconsistent size");
    it.mel.frames = frames;
    it.mel.bins = c.bins;
    it.mel.cfg.bins = c.bins;
    it.mel.data = raw.samples;
    c.items.push_back(std::move(it));
  }
  if (c.items.size() != n)
    throw IoError("manifest lists " + std::to_string(c.items.size()) + " items, meta.txt " +
                  std::to_string(n));
  return c;
}

}  // namespace mftts
