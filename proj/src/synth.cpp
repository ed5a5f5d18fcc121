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

#include "cslm/synth.hpp"

#include <cmath>
#include <set>

#include "cslm/errors.hpp"
#include "cslm/ops.hpp"
#include "cslm/rng.hpp"

namespace cslm {
namespace {

struct BigramModel {
  std::vector<std::string> words;
  std::vector<double> start;                // over words
  std::vector<std::vector<double>> next;    // row per previous word
};

std::vector<double> sparse_zipf_row(std::size_t v, std::size_t k, Rng& rng) {
  std::vector<std::size_t> order(v);
  for (std::size_t i = 0; i < v; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<double> row(v, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const double w = 1.0 / std::pow(static_cast<double>(r + 1), 1.1);
    row[order[r]] = w;
    total += w;
  }
  for (double& p : row) p /= total;
  return row;
}

std::vector<std::string> latin_words(std::size_t n, Rng& rng) {
  static const char consonants[] = "bcdfghjklmnprstvwz";
  static const char vowels[] = "aeiou";
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    const std::size_t syllables = 1 + rng.uniform_index(3);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(consonants[rng.uniform_index(sizeof(consonants) - 1)]);
      w.push_back(vowels[rng.uniform_index(sizeof(vowels) - 1)]);
    }
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::string> han_chars(std::size_t n, Rng& rng) {
  std::set<char32_t> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    const char32_t cp = 0x4E00 + static_cast<char32_t>(rng.uniform_index(0x9FFF - 0x4E00 + 1));
    if (!seen.insert(cp).second) continue;
    std::string s;
    append_utf8(s, cp);
    out.push_back(std::move(s));
  }
  return out;
}

BigramModel make_model(std::vector<std::string> words, std::size_t successors, Rng& rng) {
  BigramModel m;
  m.words = std::move(words);
  const std::size_t v = m.words.size();
  const std::size_t k = std::min(successors, v);
  m.start = sparse_zipf_row(v, k, rng);
  for (std::size_t i = 0; i < v; ++i) m.next.push_back(sparse_zipf_row(v, k, rng));
  return m;
}

}  // namespace

std::vector<std::string> synth_corpus(const SynthParams& params) {
  if (params.mean_len < 1.0) throw ConfigError("synth: mean_len must be >= 1");
  if (params.vocab_size_l0 < 10 || params.vocab_size_l1 < 10) {
    throw ConfigError("synth: vocabulary sizes must be >= 10 per language");
  }
  if (!(params.switch_prob >= 0.0 && params.switch_prob <= 1.0)) {
    throw ConfigError("synth: switch_prob must lie in [0, 1]");
  }
  if (params.successors < 1) throw ConfigError("synth: successors must be >= 1");

  Rng model_rng(derive_seed(params.seed, 0));
  BigramModel models[2] = {
      make_model(latin_words(params.vocab_size_l0, model_rng), params.successors, model_rng),
      make_model(han_chars(params.vocab_size_l1, model_rng), params.successors, model_rng)};

  Rng rng(derive_seed(params.seed, 1));
  const double stop_prob = 1.0 / params.mean_len;
  std::vector<std::string> lines;
  lines.reserve(params.n_utterances);
  for (std::size_t u = 0; u < params.n_utterances; ++u) {
    int lang = params.start == StartLang::l1 ? 1 : 0;
    if (params.start == StartLang::random) lang = rng.bernoulli(0.5) ? 1 : 0;
    // Last word emitted in each language within this utterance, or -1.
    long last[2] = {-1, -1};
    std::string line;
    bool first = true;
    for (;;) {
      if (!first && rng.bernoulli(params.switch_prob)) lang = 1 - lang;
      const BigramModel& m = models[lang];
      const auto& probs = last[lang] < 0 ? m.start : m.next[static_cast<std::size_t>(last[lang])];
      const std::size_t w = ops::sample_categorical(probs, rng);
      last[lang] = static_cast<long>(w);
      if (!first) line.push_back(' ');
      line += m.words[w];
      first = false;
      if (rng.bernoulli(stop_prob)) break;
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace cslm
