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
#include <span>
#include <string>
#include <vector>

#include "cslm/corpus.hpp"

namespace cslm {

struct FeatureDecl {
  std::string name;
  std::uint32_t cardinality = 0;

  friend bool operator==(const FeatureDecl&, const FeatureDecl&) = default;
};

using FeatureSchema = std::vector<FeatureDecl>;

struct FeatureFile {
  FeatureSchema schema;
  // One entry per utterance, each aligned with that utterance's tokens.
  std::vector<std::vector<FeatureVector>> utterances;
};

// Feature file format (UTF-8):
//   header:   name:cardinality pairs separated by tabs
//   body:     one line per utterance; tokens separated by tabs; each token's
//             features as name=id pairs separated by '|'
// Every declared feature must be present on every token. token_counts gives
// the tokenized length of each utterance; a mismatch or a missing line is a
// DataError naming the offending line.
FeatureFile load_features(std::istream& in, std::span<const std::size_t> token_counts);
FeatureFile load_features_file(const std::string& path,
                               std::span<const std::size_t> token_counts);

void write_features(std::ostream& out, const FeatureFile& file);

std::vector<std::size_t> token_counts(std::span<const Utterance> utterances);

// Per-token language-id feature named "lang" with cardinality 2.
FeatureFile lang_feature_file(std::span<const Utterance> utterances);

// True when every token's "lang" feature (if declared) equals its Token::lang.
bool lang_feature_consistent(std::span<const Utterance> utterances);

void attach_features(std::vector<Utterance>& utterances, const FeatureFile& file);

}  // namespace cslm
