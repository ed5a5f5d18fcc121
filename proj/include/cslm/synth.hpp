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
#include <string>
#include <vector>

#include "cslm/corpus.hpp"

namespace cslm {

enum class StartLang { l0, l1, random };

struct SynthParams {
  std::uint64_t seed = 1;
  std::size_t n_utterances = 1000;
  double switch_prob = 0.2;
  std::size_t vocab_size_l0 = 40;
  std::size_t vocab_size_l1 = 40;
  double mean_len = 8.0;
  StartLang start = StartLang::l0;
  // Successors with nonzero probability per word in the hidden bigram models.
  std::size_t successors = 8;
};

// Generates a code-switched corpus from two hidden per-language bigram
// models. Each utterance starts in params.start; at every token boundary the
// language switches with probability switch_prob. Lengths are geometric with
// mean mean_len. L0 words are Latin pseudo-words, L1 tokens single Han
// characters; tokens are space separated. Throws ConfigError on degenerate
// parameters.
std::vector<std::string> synth_corpus(const SynthParams& params);

}  // namespace cslm
