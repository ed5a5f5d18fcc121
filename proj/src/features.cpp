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

#include "cslm/features.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cslm/errors.hpp"

namespace cslm {
namespace {

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, delim)) out.push_back(item);
  if (!s.empty() && s.back() == delim) out.emplace_back();
  return out;
}

std::uint32_t parse_uint(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size()) throw DataError(where + ": bad integer '" + s + "'");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

FeatureFile load_features(std::istream& in, std::span<const std::size_t> token_counts) {
  FeatureFile file;
  std::string line;
  if (!std::getline(in, line)) throw DataError("features line 1: missing header");
  for (const auto& decl : split(line, '\t')) {
    const auto colon = decl.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      throw DataError("features line 1: bad declaration '" + decl + "'");
    }
    FeatureDecl d{decl.substr(0, colon), parse_uint(decl.substr(colon + 1), "features line 1")};
    if (d.cardinality == 0) throw DataError("features line 1: zero cardinality for " + d.name);
    for (const auto& prev : file.schema) {
      if (prev.name == d.name) throw DataError("features line 1: duplicate feature " + d.name);
    }
    file.schema.push_back(std::move(d));
  }

  for (std::size_t u = 0; u < token_counts.size(); ++u) {
    const std::string where = "features line " + std::to_string(u + 2);
    if (!std::getline(in, line)) {
      throw DataError(where + ": missing (utterance " + std::to_string(u) + ")");
    }
    const auto tokens = split(line, '\t');
    if (tokens.size() != token_counts[u]) {
      throw DataError(where + ": " + std::to_string(tokens.size()) +
                      " feature tuples for an utterance of " +
                      std::to_string(token_counts[u]) + " tokens");
    }
    std::vector<FeatureVector> vectors;
    vectors.reserve(tokens.size());
    for (const auto& tok : tokens) {
      FeatureVector fv;
      for (const auto& pair : split(tok, '|')) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos) throw DataError(where + ": bad feature '" + pair + "'");
        const std::string name = pair.substr(0, eq);
        const std::uint32_t id = parse_uint(pair.substr(eq + 1), where);
        const FeatureDecl* decl = nullptr;
        for (const auto& d : file.schema) {
          if (d.name == name) decl = &d;
        }
        if (!decl) throw DataError(where + ": undeclared feature '" + name + "'");
        if (id >= decl->cardinality) {
          throw DataError(where + ": " + name + "=" + std::to_string(id) +
                          " exceeds cardinality " + std::to_string(decl->cardinality));
        }
        fv.values.emplace_back(name, id);
      }
      if (fv.values.size() != file.schema.size()) {
        throw DataError(where + ": token carries " + std::to_string(fv.values.size()) +
                        " of " + std::to_string(file.schema.size()) + " declared features");
      }
      vectors.push_back(std::move(fv));
    }
    file.utterances.push_back(std::move(vectors));
  }
  return file;
}

FeatureFile load_features_file(const std::string& path,
                               std::span<const std::size_t> token_counts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read feature file " + path);
  return load_features(in, token_counts);
}

void write_features(std::ostream& out, const FeatureFile& file) {
  for (std::size_t i = 0; i < file.schema.size(); ++i) {
    if (i) out << '\t';
    out << file.schema[i].name << ':' << file.schema[i].cardinality;
  }
  out << '\n';
  for (const auto& utt : file.utterances) {
    for (std::size_t t = 0; t < utt.size(); ++t) {
      if (t) out << '\t';
      for (std::size_t k = 0; k < utt[t].values.size(); ++k) {
        if (k) out << '|';
        out << utt[t].values[k].first << '=' << utt[t].values[k].second;
      }
    }
    out << '\n';
  }
}

std::vector<std::size_t> token_counts(std::span<const Utterance> utterances) {
  std::vector<std::size_t> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(u.tokens.size());
  return out;
}

FeatureFile lang_feature_file(std::span<const Utterance> utterances) {
  FeatureFile file;
  file.schema = {{"lang", 2}};
  for (const auto& u : utterances) {
    std::vector<FeatureVector> vectors;
    for (const auto& t : u.tokens) {
      vectors.push_back(FeatureVector{{{"lang", static_cast<std::uint32_t>(bit(t.lang))}}});
    }
    file.utterances.push_back(std::move(vectors));
  }
  return file;
}

bool lang_feature_consistent(std::span<const Utterance> utterances) {
  for (const auto& u : utterances) {
    for (std::size_t i = 0; i < u.features.size(); ++i) {
      for (const auto& [name, id] : u.features[i].values) {
        if (name == "lang" && id != static_cast<std::uint32_t>(bit(u.tokens[i].lang))) {
          return false;
        }
      }
    }
  }
  return true;
}

void attach_features(std::vector<Utterance>& utterances, const FeatureFile& file) {
  if (file.utterances.size() != utterances.size()) {
    throw DataError("feature file covers " + std::to_string(file.utterances.size()) +
                    " utterances, corpus has " + std::to_string(utterances.size()));
  }
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (file.utterances[i].size() != utterances[i].tokens.size()) {
      throw DataError("feature/token length mismatch at utterance " + std::to_string(i));
    }
    utterances[i].features = file.utterances[i];
  }
}

}  // namespace cslm
