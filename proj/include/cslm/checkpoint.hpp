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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cslm/tensor.hpp"

namespace cslm {

// Parameter checkpoint layout:
//   "CSLM-PARAMS 1\n"
//   "<count>\n"
//   one index line per tensor: "<name>\t<rank>\t<d0>\t<d1>...\n"
//   "DATA\n"
//   raw little-endian IEEE-754 binary64 values, tensors in index order.
void write_parameters(std::ostream& out, std::span<const Parameter* const> params);
void write_parameters(std::ostream& out, const std::vector<Parameter*>& params);

struct NamedTensor {
  std::string name;
  Tensor value;
};

std::vector<NamedTensor> read_parameters(std::istream& in);

// Reads a checkpoint into existing parameters; names and shapes must match
// one-to-one and in order.
void load_parameters(std::istream& in, std::span<Parameter* const> params);

// FNV-1a over bytes; used for vocabulary and generator fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::uint64_t parameter_fingerprint(std::span<const Parameter* const> params);

}  // namespace cslm
