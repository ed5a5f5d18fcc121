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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cslm/corpus.hpp"

namespace cslm {

// Two-language vocabulary over one global id space:
//
//   0                 BOS  (language neutral, input only)
//   1                 EOS  (language neutral, predicted)
//   [2, 2+n0)         L0 block: DUMMY0, UNK0, L0 words...
//   [2+n0, 2+n0+n1)   L1 block: DUMMY1, UNK1, L1 words...
//
// The scorable (output) space drops the dummies and BOS:
//   [0, n0-1)            UNK0, L0 words
//   [n0-1, n0+n1-2)      UNK1, L1 words
//   n0+n1-2              EOS
class Vocabulary {
 public:
  static constexpr SymbolId kBos = 0;
  static constexpr SymbolId kEos = 1;
  static constexpr std::size_t kSpecialsPerLang = 2;  // DUMMY, UNK

  Vocabulary() : Vocabulary({}, {}) {}
  // words0/words1 in final index order; must not contain duplicates.
  Vocabulary(std::vector<std::string> words0, std::vector<std::string> words1,
             std::size_t min_count = 1);

  // Frequency-descending, ties lexicographic; forms rarer than min_count
  // fall back to UNK of their language. Throws DataError on an empty corpus
  // and ConfigError for min_count < 1.
  static Vocabulary build(std::span<const std::vector<SurfaceToken>> utterances,
                          std::size_t min_count = 1);

  std::size_t min_count() const { return min_count_; }

  // Total number of global ids.
  std::size_t size() const { return 2 + block_size(Lang::l0) + block_size(Lang::l1); }
  // Ids in a language's block, dummy and unk included.
  std::size_t block_size(Lang l) const { return kSpecialsPerLang + words_[bit(l)].size(); }
  SymbolId block_start(Lang l) const;
  SymbolId dummy(Lang l) const { return block_start(l); }
  SymbolId unk(Lang l) const { return block_start(l) + 1; }

  const std::vector<std::string>& words(Lang l) const { return words_[bit(l)]; }

  // Language of an id; nullopt for BOS/EOS.
  std::optional<Lang> lang_of(SymbolId id) const;
  bool is_dummy(SymbolId id) const { return id == dummy(Lang::l0) || id == dummy(Lang::l1); }
  bool is_scorable(SymbolId id) const { return id != kBos && id < size() && !is_dummy(id); }

  std::size_t scorable_size() const { return block_size(Lang::l0) + block_size(Lang::l1) - 1; }
  std::size_t eos_scorable() const { return scorable_size() - 1; }
  // Scorable index range [begin, end) of a language's outputs.
  std::size_t scorable_begin(Lang l) const { return l == Lang::l0 ? 0 : block_size(Lang::l0) - 1; }
  std::size_t scorable_end(Lang l) const { return scorable_begin(l) + block_size(l) - 1; }
  std::size_t to_scorable(SymbolId id) const;  // throws for BOS/dummies
  SymbolId from_scorable(std::size_t index) const;

  // Exact lookup; nullopt when the form is not a word of that language.
  std::optional<SymbolId> find(const SurfaceToken& token) const;
  // Lookup with UNK fallback.
  Token encode_token(const SurfaceToken& token) const;
  const std::string& surface(SymbolId id) const;

  // Vocabulary file: "<lang>\t<surface>\t<index>" per line, the six specials
  // first, then words in index order. BOS/EOS carry "-" as their language.
  void write(std::ostream& out) const;
  std::string serialize() const;
  static Vocabulary read(std::istream& in);
  static Vocabulary read_file(const std::string& path);

  // FNV-1a over the serialized file.
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_[0] == b.words_[0] && a.words_[1] == b.words_[1];
  }

 private:
  std::vector<std::string> words_[2];
  std::unordered_map<std::string, SymbolId> index_[2];
  std::size_t min_count_ = 1;
};

Utterance encode(std::span<const SurfaceToken> utterance, const Vocabulary& vocab);
std::vector<SurfaceToken> decode(const Utterance& utterance, const Vocabulary& vocab);
std::vector<Utterance> encode_all(std::span<const std::vector<SurfaceToken>> utterances,
                                  const Vocabulary& vocab);

extern const char* const kBosSurface;
extern const char* const kEosSurface;

}  // namespace cslm
