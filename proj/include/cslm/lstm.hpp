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
#include <span>
#include <string>
#include <vector>

#include "cslm/rng.hpp"
#include "cslm/tensor.hpp"

namespace cslm {

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;
};

// Forward values kept for the backward pass.
struct LstmCache {
  std::vector<double> xh;      // [x; h_prev]
  std::vector<double> c_prev;
  std::vector<double> gates;   // activated i, f, o, g (4H)
  std::vector<double> tanh_c;  // tanh(c')
};

// Single LSTM cell. One weight matrix [4H x (D+H)] over the concatenated
// input and previous hidden state; gate blocks in order i, f, o, g.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& prefix, std::size_t input_size, std::size_t hidden_size);

  std::size_t input_size() const { return input_size_; }
  std::size_t hidden_size() const { return hidden_size_; }

  // Weights uniform in [-scale, scale]; biases 0 except the forget gate (1.0).
  void initialize(Rng& rng, double scale);

  LstmState zero_state() const;

  // h_prev and c_prev are passed separately so a caller can pair one cell's
  // memory with another cell's hidden output.
  void step(std::span<const double> x, std::span<const double> h_prev,
            std::span<const double> c_prev, LstmState& out, LstmCache* cache) const;

  // Given dL/dh' and dL/dc', accumulates parameter gradients and ADDS the
  // input, previous-hidden and previous-memory gradients into dx, dh_prev
  // and dc_prev (each may be empty when not needed).
  void backward(const LstmCache& cache, std::span<const double> dh,
                std::span<const double> dc, std::span<double> dx,
                std::span<double> dh_prev, std::span<double> dc_prev);

  Parameter weight;
  Parameter bias;

 private:
  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
};

}  // namespace cslm
