// Copyright 2026 The cslm Authors.
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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cslm {

// Language of a token. L0 is the Latin-script language (English), L1 the
// Han-script language (Mandarin).
enum class Lang : std::uint8_t { l0 = 0, l1 = 1 };

constexpr int bit(Lang l) { return static_cast<int>(l); }
constexpr Lang lang_from_bit(int b) { return b ? Lang::l1 : Lang::l0; }
constexpr Lang other(Lang l) { return l == Lang::l0 ? Lang::l1 : Lang::l0; }
constexpr const char* short_name(Lang l) { return l == Lang::l0 ? "Eng" : "Man"; }

struct SurfaceToken {
  std::string text;
  Lang lang = Lang::l0;

  friend bool operator==(const SurfaceToken&, const SurfaceToken&) = default;
};

// Vocabulary symbol id. Ids index a single global space shared by both
// languages (see Vocabulary for the layout).
using SymbolId = std::uint32_t;

struct Token {
  Lang lang = Lang::l0;
  SymbolId id = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct FeatureVector {
  std::vector<std::pair<std::string, std::uint32_t>> values;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct Utterance {
  std::vector<Token> tokens;
  // Empty when the corpus carries no side features; otherwise aligned 1:1
  // with tokens.
  std::vector<FeatureVector> features;

  bool has_features() const { return !features.empty(); }
};

struct CorpusSplit {
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
  std::uint64_t seed = 0;
  std::uint64_t vocab_hash = 0;
};

// ---------------------------------------------------------------------------
// Tokenization

bool is_han(char32_t cp);
bool is_unicode_space(char32_t cp);

// Decodes UTF-8; throws DataError on malformed input.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);
void append_utf8(std::string& out, char32_t cp);

// Splits a raw line into L0 words (maximal non-Han runs between
// whitespace, lowercased) and L1 tokens (one per Han codepoint). Throws
// EmptyUtteranceError when nothing remains.
std::vector<SurfaceToken> tokenize_utterance(std::string_view line);

// Reads a corpus file: one utterance per line. Lines that tokenize to
// nothing are skipped.
std::vector<std::vector<SurfaceToken>> read_tokenized_corpus(std::istream& in);
std::vector<std::vector<SurfaceToken>> read_tokenized_corpus_file(const std::string& path);

// Inverse of tokenization up to whitespace: tokens joined by single spaces.
std::string join_surface(std::span<const SurfaceToken> tokens);

// ---------------------------------------------------------------------------
// Splits and statistics

struct SplitIndices {
  std::vector<std::size_t> train, dev, test;
};

// Split percentages for train, dev and test; they must sum to 100.
using SplitPercent = std::array<unsigned, 3>;
inline constexpr SplitPercent kDefaultSplit = {80, 10, 10};

// Parses "80/10/10". Throws ConfigError.
SplitPercent parse_split_percent(const std::string& text);

// Random partition of [0, n). dev and test get round(n * pct / 100) each,
// train gets the remainder. Throws std::invalid_argument if percent does not
// sum to 100.
SplitIndices split_indices(std::size_t n, std::uint64_t seed,
                           const SplitPercent& percent = kDefaultSplit);

template <typename T>
std::array<std::vector<T>, 3> apply_split(const std::vector<T>& items,
                                          const SplitIndices& idx) {
  std::array<std::vector<T>, 3> out;
  const std::vector<std::size_t>* parts[3] = {&idx.train, &idx.dev, &idx.test};
  for (int k = 0; k < 3; ++k) {
    out[k].reserve(parts[k]->size());
    for (std::size_t i : *parts[k]) out[k].push_back(items[i]);
  }
  return out;
}

// Throws DataError for fewer than 10 utterances.
CorpusSplit split_corpus(const std::vector<Utterance>& utterances, std::uint64_t seed);

struct SplitStats {
  std::size_t utterances = 0;
  std::size_t tokens = 0;
  std::size_t l0_tokens = 0;
  std::size_t l1_tokens = 0;

  friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

SplitStats utterance_stats(std::span<const Utterance> utterances);
SplitStats surface_stats(std::span<const std::vector<SurfaceToken>> utterances);

struct CorpusStats {
  SplitStats train, dev, test;
};

CorpusStats corpus_stats(const CorpusSplit& split);

// Table-1 layout: one row per statistic, one column per split.
void write_stats_tsv(std::ostream& out, const CorpusStats& stats);

// Fraction of within-utterance adjacent token pairs whose languages differ.
double switch_rate(std::span<const std::vector<SurfaceToken>> utterances);

}  // namespace cslm
