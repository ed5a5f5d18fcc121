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

#include "cslm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "cslm/errors.hpp"

namespace cslm {
namespace {

constexpr const char* kMagic = "CSLM-PARAMS 1";

void write_le64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double read_le64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw DataError("checkpoint truncated in tensor data");
  }
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string("checkpoint: missing ") + what);
  return line;
}

template <typename ParamPtr>
void write_impl(std::ostream& out, std::span<ParamPtr const> params) {
  out << kMagic << '\n' << params.size() << '\n';
  for (const Parameter* p : params) {
    out << p->name << '\t' << p->value.rank();
    for (std::size_t d : p->value.shape()) out << '\t' << d;
    out << '\n';
  }
  out << "DATA\n";
  for (const Parameter* p : params) {
    for (double v : p->value.values()) write_le64(out, v);
  }
  if (!out) throw DataError("checkpoint write failed");
}

}  // namespace

void write_parameters(std::ostream& out, std::span<const Parameter* const> params) {
  write_impl(out, params);
}

void write_parameters(std::ostream& out, const std::vector<Parameter*>& params) {
  write_impl(out, std::span<Parameter* const>(params));
}

std::vector<NamedTensor> read_parameters(std::istream& in) {
  if (read_line(in, "magic") != kMagic) throw DataError("not a parameter checkpoint");
  std::size_t count = 0;
  {
    std::istringstream line(read_line(in, "tensor count"));
    if (!(line >> count)) throw DataError("checkpoint: bad tensor count");
  }
  std::vector<NamedTensor> out;
  std::vector<std::vector<std::size_t>> shapes;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream line(read_line(in, "index line"));
    NamedTensor t;
    std::size_t rank = 0;
    if (!std::getline(line, t.name, '\t') || !(line >> rank)) {
      throw DataError("checkpoint: malformed index line " + std::to_string(i + 1));
    }
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) {
      if (!(line >> d)) throw DataError("checkpoint: malformed shape for " + t.name);
    }
    shapes.push_back(std::move(shape));
    out.push_back(std::move(t));
  }
  if (read_line(in, "DATA marker") != "DATA") throw DataError("checkpoint: missing DATA marker");
  for (std::size_t i = 0; i < count; ++i) {
    Tensor t(shapes[i]);
    for (double& v : t.values()) v = read_le64(in);
    out[i].value = std::move(t);
  }
  return out;
}

void load_parameters(std::istream& in, std::span<Parameter* const> params) {
  auto tensors = read_parameters(in);
  if (tensors.size() != params.size()) {
    throw DataError("checkpoint holds " + std::to_string(tensors.size()) +
                    " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].name != params[i]->name ||
        !tensors[i].value.same_shape(params[i]->value)) {
      throw DataError("checkpoint tensor " + tensors[i].name +
                      shape_string(tensors[i].value.shape()) + " does not match " +
                      params[i]->name + shape_string(params[i]->value.shape()));
    }
    params[i]->value = std::move(tensors[i].value);
    params[i]->zero_grad();
  }
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << value;
  return out.str();
}

std::uint64_t parameter_fingerprint(std::span<const Parameter* const> params) {
  std::ostringstream buf;
  write_parameters(buf, params);
  return fnv1a64(buf.str());
}

}  // namespace cslm
