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

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cslm/corpus.hpp"
#include "cslm/synth.hpp"
#include "cslm/vocabulary.hpp"

namespace cslm::testing {

struct ToyCorpus {
  Vocabulary vocab;
  std::vector<Utterance> utterances;
};

inline ToyCorpus toy_corpus(std::size_t n, std::uint64_t seed, double switch_prob = 0.2,
                            std::size_t vocab_size = 10, double mean_len = 6.0) {
  SynthParams params;
  params.seed = seed;
  params.n_utterances = n;
  params.switch_prob = switch_prob;
  params.vocab_size_l0 = vocab_size;
  params.vocab_size_l1 = vocab_size;
  params.mean_len = mean_len;
  std::vector<std::vector<SurfaceToken>> surface;
  for (const auto& line : synth_corpus(params)) surface.push_back(tokenize_utterance(line));
  Vocabulary vocab = Vocabulary::build(surface, 1);
  auto encoded = encode_all(surface, vocab);
  return {std::move(vocab), std::move(encoded)};
}

// Every utterance used as both train and dev.
inline CorpusSplit memorization_split(const ToyCorpus& toy) {
  CorpusSplit split;
  split.train = toy.utterances;
  split.dev = toy.utterances;
  split.vocab_hash = toy.vocab.hash();
  return split;
}

// Lowest perplexity any model can reach on the set: continuations of each
// distinct prefix are predicted by their empirical frequencies.
inline double prefix_tree_floor(const std::vector<Utterance>& utterances) {
  std::map<std::vector<SymbolId>, std::map<SymbolId, int>> next;
  std::size_t n = 0;
  for (const auto& u : utterances) {
    std::vector<SymbolId> prefix;
    for (std::size_t i = 0; i <= u.tokens.size(); ++i) {
      const SymbolId t = i < u.tokens.size() ? u.tokens[i].id : Vocabulary::kEos;
      ++next[prefix][t];
      ++n;
      prefix.push_back(t);
    }
  }
  double nll = 0.0;
  for (const auto& [prefix, counts] : next) {
    int total = 0;
    for (const auto& [t, c] : counts) total += c;
    for (const auto& [t, c] : counts) nll -= c * std::log(static_cast<double>(c) / total);
  }
  return std::exp(nll / static_cast<double>(n));
}

// Ten utterances long enough that memorization can push perplexity well
// below 1.5.
inline ToyCorpus overfit_corpus(std::uint64_t seed = 3) {
  return toy_corpus(10, seed, 0.2, 10, 12.0);
}

}  // namespace cslm::testing
