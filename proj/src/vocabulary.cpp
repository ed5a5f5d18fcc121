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

#include "cslm/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cslm/checkpoint.hpp"
#include "cslm/errors.hpp"

namespace cslm {

const char* const kBosSurface = "<s>";
const char* const kEosSurface = "</s>";

namespace {

const char* const kDummySurface[2] = {"<dummy0>", "<dummy1>"};
const char* const kUnkSurface[2] = {"<unk0>", "<unk1>"};

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words0, std::vector<std::string> words1,
                       std::size_t min_count)
    : min_count_(min_count) {
  words_[0] = std::move(words0);
  words_[1] = std::move(words1);
  for (int b = 0; b < 2; ++b) {
    const SymbolId start = block_start(lang_from_bit(b)) + kSpecialsPerLang;
    for (std::size_t i = 0; i < words_[b].size(); ++i) {
      if (!index_[b].emplace(words_[b][i], start + static_cast<SymbolId>(i)).second) {
        throw DataError("duplicate vocabulary entry '" + words_[b][i] + "'");
      }
    }
  }
}

Vocabulary Vocabulary::build(std::span<const std::vector<SurfaceToken>> utterances,
                             std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::map<std::string, std::size_t> counts[2];
  std::size_t total = 0;
  for (const auto& u : utterances) {
    for (const auto& t : u) {
      ++counts[bit(t.lang)][t.text];
      ++total;
    }
  }
  if (total == 0) throw DataError("empty corpus");

  std::vector<std::string> words[2];
  for (int b = 0; b < 2; ++b) {
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [form, c] : counts[b]) {
      if (c >= min_count) kept.emplace_back(form, c);
    }
    // std::map iteration is lexicographic, so a stable sort by count keeps
    // lexicographic order among ties.
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b2) { return a.second > b2.second; });
    for (auto& [form, c] : kept) words[b].push_back(form);
  }
  return Vocabulary(std::move(words[0]), std::move(words[1]), min_count);
}

SymbolId Vocabulary::block_start(Lang l) const {
  return l == Lang::l0 ? 2 : static_cast<SymbolId>(2 + block_size(Lang::l0));
}

std::optional<Lang> Vocabulary::lang_of(SymbolId id) const {
  if (id < 2 || id >= size()) return std::nullopt;
  return id < block_start(Lang::l1) ? Lang::l0 : Lang::l1;
}

std::size_t Vocabulary::to_scorable(SymbolId id) const {
  if (id == kEos) return eos_scorable();
  if (!is_scorable(id)) {
    throw std::out_of_range("symbol " + std::to_string(id) + " is not scorable");
  }
  const Lang l = *lang_of(id);
  return scorable_begin(l) + (id - block_start(l) - 1);
}

SymbolId Vocabulary::from_scorable(std::size_t index) const {
  if (index == eos_scorable()) return kEos;
  if (index > eos_scorable()) {
    throw std::out_of_range("scorable index " + std::to_string(index) + " out of range");
  }
  const Lang l = index < scorable_end(Lang::l0) ? Lang::l0 : Lang::l1;
  return block_start(l) + 1 + static_cast<SymbolId>(index - scorable_begin(l));
}

std::optional<SymbolId> Vocabulary::find(const SurfaceToken& token) const {
  const auto& idx = index_[bit(token.lang)];
  auto it = idx.find(token.text);
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

Token Vocabulary::encode_token(const SurfaceToken& token) const {
  return {token.lang, find(token).value_or(unk(token.lang))};
}

const std::string& Vocabulary::surface(SymbolId id) const {
  static const std::string bos = kBosSurface, eos = kEosSurface;
  static const std::string dummy[2] = {kDummySurface[0], kDummySurface[1]};
  static const std::string unks[2] = {kUnkSurface[0], kUnkSurface[1]};
  if (id == kBos) return bos;
  if (id == kEos) return eos;
  const auto l = lang_of(id);
  if (!l) throw std::out_of_range("symbol " + std::to_string(id) + " out of range");
  const int b = bit(*l);
  const SymbolId offset = id - block_start(*l);
  if (offset == 0) return dummy[b];
  if (offset == 1) return unks[b];
  return words_[b][offset - kSpecialsPerLang];
}

void Vocabulary::write(std::ostream& out) const {
  out << "-\t" << kBosSurface << '\t' << kBos << '\n';
  out << "-\t" << kEosSurface << '\t' << kEos << '\n';
  for (int b = 0; b < 2; ++b) {
    const Lang l = lang_from_bit(b);
    out << b << '\t' << kDummySurface[b] << '\t' << dummy(l) << '\n';
    out << b << '\t' << kUnkSurface[b] << '\t' << unk(l) << '\n';
  }
  for (int b = 0; b < 2; ++b) {
    const SymbolId start = block_start(lang_from_bit(b)) + kSpecialsPerLang;
    for (std::size_t i = 0; i < words_[b].size(); ++i) {
      out << b << '\t' << words_[b][i] << '\t' << start + i << '\n';
    }
  }
}

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::string> words[2];
  std::string line;
  std::size_t line_no = 0;
  struct Entry {
    std::string lang, surface;
    SymbolId index;
  };
  std::vector<Entry> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Entry e;
    std::string index;
    if (!std::getline(fields, e.lang, '\t') || !std::getline(fields, e.surface, '\t') ||
        !std::getline(fields, index)) {
      throw DataError("vocabulary line " + std::to_string(line_no) + ": expected 3 fields");
    }
    try {
      e.index = static_cast<SymbolId>(std::stoul(index));
    } catch (const std::exception&) {
      throw DataError("vocabulary line " + std::to_string(line_no) + ": bad index");
    }
    entries.push_back(std::move(e));
  }
  if (entries.size() < 6) throw DataError("vocabulary file lacks the special symbols");
  for (std::size_t i = 6; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.lang != "0" && e.lang != "1") {
      throw DataError("vocabulary entry " + std::to_string(i + 1) + ": bad language '" +
                      e.lang + "'");
    }
    words[e.lang == "1"].push_back(e.surface);
  }
  Vocabulary vocab(std::move(words[0]), std::move(words[1]));
  // Indices are implied by the layout; verify the file agrees.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.index >= vocab.size() || vocab.surface(e.index) != e.surface) {
      throw DataError("vocabulary entry " + std::to_string(i + 1) + " ('" + e.surface +
                      "') has inconsistent index " + std::to_string(e.index));
    }
  }
  return vocab;
}

Vocabulary Vocabulary::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary file " + path);
  return read(in);
}

std::uint64_t Vocabulary::hash() const { return fnv1a64(serialize()); }

Utterance encode(std::span<const SurfaceToken> utterance, const Vocabulary& vocab) {
  Utterance u;
  u.tokens.reserve(utterance.size());
  for (const auto& t : utterance) u.tokens.push_back(vocab.encode_token(t));
  return u;
}

std::vector<SurfaceToken> decode(const Utterance& utterance, const Vocabulary& vocab) {
  std::vector<SurfaceToken> out;
  out.reserve(utterance.tokens.size());
  for (const auto& t : utterance.tokens) out.push_back({vocab.surface(t.id), t.lang});
  return out;
}

std::vector<Utterance> encode_all(std::span<const std::vector<SurfaceToken>> utterances,
                                  const Vocabulary& vocab) {
  std::vector<Utterance> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(encode(u, vocab));
  return out;
}

}  // namespace cslm
