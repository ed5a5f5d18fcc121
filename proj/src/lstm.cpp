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

#include "cslm/lstm.hpp"

#include <cmath>

#include "cslm/errors.hpp"
#include "cslm/ops.hpp"

namespace cslm {

LstmCell::LstmCell(const std::string& prefix, std::size_t input_size,
                   std::size_t hidden_size)
    : weight(prefix + ".weight", Tensor({4 * hidden_size, input_size + hidden_size})),
      bias(prefix + ".bias", Tensor({4 * hidden_size})),
      input_size_(input_size),
      hidden_size_(hidden_size) {}

void LstmCell::initialize(Rng& rng, double scale) {
  for (double& w : weight.value.values()) w = rng.uniform(-scale, scale);
  bias.value.fill(0.0);
  for (std::size_t k = 0; k < hidden_size_; ++k) bias.value[hidden_size_ + k] = 1.0;
}

LstmState LstmCell::zero_state() const {
  return {std::vector<double>(hidden_size_, 0.0), std::vector<double>(hidden_size_, 0.0)};
}

void LstmCell::step(std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev, LstmState& out,
                    LstmCache* cache) const {
  const std::size_t H = hidden_size_;
  if (x.size() != input_size_ || h_prev.size() != H || c_prev.size() != H) {
    throw ShapeError("lstm step: expected x[" + std::to_string(input_size_) + "], h/c[" +
                     std::to_string(H) + "]");
  }
  std::vector<double> local_xh;
  std::vector<double>& xh = cache ? cache->xh : local_xh;
  xh.resize(input_size_ + H);
  std::copy(x.begin(), x.end(), xh.begin());
  std::copy(h_prev.begin(), h_prev.end(), xh.begin() + static_cast<std::ptrdiff_t>(input_size_));

  std::vector<double> local_gates;
  std::vector<double>& z = cache ? cache->gates : local_gates;
  z.resize(4 * H);
  ops::affine(weight.value, xh, bias.value, z);
  for (std::size_t k = 0; k < 3 * H; ++k) z[k] = ops::sigmoid(z[k]);
  for (std::size_t k = 3 * H; k < 4 * H; ++k) z[k] = std::tanh(z[k]);

  out.h.resize(H);
  out.c.resize(H);
  if (cache) {
    cache->c_prev.assign(c_prev.begin(), c_prev.end());
    cache->tanh_c.resize(H);
  }
  for (std::size_t k = 0; k < H; ++k) {
    const double i = z[k], f = z[H + k], o = z[2 * H + k], g = z[3 * H + k];
    const double c = f * c_prev[k] + i * g;
    const double tc = std::tanh(c);
    out.c[k] = c;
    out.h[k] = o * tc;
    if (cache) cache->tanh_c[k] = tc;
  }
}

void LstmCell::backward(const LstmCache& cache, std::span<const double> dh,
                        std::span<const double> dc, std::span<double> dx,
                        std::span<double> dh_prev, std::span<double> dc_prev) {
  const std::size_t H = hidden_size_;
  const auto& z = cache.gates;
  std::vector<double> dz(4 * H);
  for (std::size_t k = 0; k < H; ++k) {
    const double i = z[k], f = z[H + k], o = z[2 * H + k], g = z[3 * H + k];
    const double tc = cache.tanh_c[k];
    const double dct = dc[k] + dh[k] * o * ops::tanh_grad_from_output(tc);
    dz[k] = dct * g * ops::sigmoid_grad_from_output(i);
    dz[H + k] = dct * cache.c_prev[k] * ops::sigmoid_grad_from_output(f);
    dz[2 * H + k] = dh[k] * tc * ops::sigmoid_grad_from_output(o);
    dz[3 * H + k] = dct * i * ops::tanh_grad_from_output(g);
    if (!dc_prev.empty()) dc_prev[k] += dct * f;
  }
  std::vector<double> dxh(input_size_ + H, 0.0);
  ops::affine_backward(weight.value, cache.xh, dz, weight.grad, bias.grad, dxh);
  if (!dx.empty()) {
    for (std::size_t k = 0; k < input_size_; ++k) dx[k] += dxh[k];
  }
  if (!dh_prev.empty()) {
    for (std::size_t k = 0; k < H; ++k) dh_prev[k] += dxh[input_size_ + k];
  }
}

}  // namespace cslm
