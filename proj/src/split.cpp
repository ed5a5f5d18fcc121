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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cslm/corpus.hpp"
#include "cslm/errors.hpp"
#include "cslm/rng.hpp"

namespace cslm {

SplitPercent parse_split_percent(const std::string& text) {
  SplitPercent out{};
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    const auto end = k < 2 ? text.find('/', pos) : text.size();
    if (end == std::string::npos) break;
    const auto field = text.substr(pos, end - pos);
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out[k]);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) break;
    if (k == 2 && out[0] + out[1] + out[2] == 100) return out;
    pos = end + 1;
  }
  throw ConfigError("split '" + text + "' is not three percentages summing to 100");
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed, const SplitPercent& percent) {
  if (percent[0] + percent[1] + percent[2] != 100) {
    throw std::invalid_argument("split percentages must sum to 100");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  auto share = [n](unsigned pct) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * pct / 100.0));
  };
  const std::size_t n_dev = share(percent[1]);
  const std::size_t n_test = std::min(share(percent[2]), n - n_dev);
  const std::size_t n_train = n - n_dev - n_test;
  SplitIndices idx;
  idx.train.assign(order.begin(), order.begin() + n_train);
  idx.dev.assign(order.begin() + n_train, order.begin() + n_train + n_dev);
  idx.test.assign(order.begin() + n_train + n_dev, order.end());
  return idx;
}

CorpusSplit split_corpus(const std::vector<Utterance>& utterances, std::uint64_t seed) {
  if (utterances.size() < 10) {
    throw DataError("corpus too small to split: " + std::to_string(utterances.size()) +
                    " utterances (need at least 10)");
  }
  auto parts = apply_split(utterances, split_indices(utterances.size(), seed));
  CorpusSplit split;
  split.train = std::move(parts[0]);
  split.dev = std::move(parts[1]);
  split.test = std::move(parts[2]);
  split.seed = seed;
  return split;
}

SplitStats utterance_stats(std::span<const Utterance> utterances) {
  SplitStats s;
  s.utterances = utterances.size();
  for (const auto& u : utterances) {
    for (const auto& t : u.tokens) {
      ++s.tokens;
      (t.lang == Lang::l0 ? s.l0_tokens : s.l1_tokens)++;
    }
  }
  return s;
}

SplitStats surface_stats(std::span<const std::vector<SurfaceToken>> utterances) {
  SplitStats s;
  s.utterances = utterances.size();
  for (const auto& u : utterances) {
    for (const auto& t : u) {
      ++s.tokens;
      (t.lang == Lang::l0 ? s.l0_tokens : s.l1_tokens)++;
    }
  }
  return s;
}

CorpusStats corpus_stats(const CorpusSplit& split) {
  return {utterance_stats(split.train), utterance_stats(split.dev),
          utterance_stats(split.test)};
}

void write_stats_tsv(std::ostream& out, const CorpusStats& stats) {
  const SplitStats* cols[3] = {&stats.train, &stats.dev, &stats.test};
  out << "stat\ttrain\tdev\ttest\n";
  auto row = [&](const char* name, std::size_t SplitStats::*field) {
    out << name;
    for (const SplitStats* c : cols) out << '\t' << c->*field;
    out << '\n';
  };
  row("utterances", &SplitStats::utterances);
  row("tokens", &SplitStats::tokens);
  row("l0_tokens", &SplitStats::l0_tokens);
  row("l1_tokens", &SplitStats::l1_tokens);
}

double switch_rate(std::span<const std::vector<SurfaceToken>> utterances) {
  std::size_t pairs = 0;
  std::size_t switches = 0;
  for (const auto& u : utterances) {
    for (std::size_t i = 1; i < u.size(); ++i) {
      ++pairs;
      if (u[i].lang != u[i - 1].lang) ++switches;
    }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(switches) / static_cast<double>(pairs);
}

}  // namespace cslm
