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

#include "cslm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cslm/errors.hpp"

namespace cslm::ops {
namespace {

void check_affine_shapes(const Tensor& W, std::size_t n, std::size_t b,
                         std::size_t y) {
  if (W.rank() != 2 || W.shape()[1] != n || W.shape()[0] != b ||
      W.shape()[0] != y) {
    throw ShapeError("affine: W" + shape_string(W.shape()) + " with x[" +
                     std::to_string(n) + "], b[" + std::to_string(b) +
                     "], y[" + std::to_string(y) + "]");
  }
}

}  // namespace

void affine(const Tensor& W, std::span<const double> x, const Tensor& b,
            std::span<double> y) {
  check_affine_shapes(W, x.size(), b.size(), y.size());
  const std::size_t m = y.size();
  const std::size_t n = x.size();
  const double* w = W.values().data();
  for (std::size_t r = 0; r < m; ++r) {
    const double* wr = w + r * n;
    // Four partial sums: a fixed summation order that still pipelines.
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
      acc[0] += wr[c] * x[c];
      acc[1] += wr[c + 1] * x[c + 1];
      acc[2] += wr[c + 2] * x[c + 2];
      acc[3] += wr[c + 3] * x[c + 3];
    }
    for (; c < n; ++c) acc[0] += wr[c] * x[c];
    y[r] = b[r] + ((acc[0] + acc[1]) + (acc[2] + acc[3]));
  }
}

std::vector<double> affine(const Tensor& W, std::span<const double> x,
                           const Tensor& b) {
  std::vector<double> y(b.size());
  affine(W, x, b, y);
  return y;
}

void affine_backward(const Tensor& W, std::span<const double> x,
                     std::span<const double> dy, Tensor& dW, Tensor& db,
                     std::span<double> dx) {
  check_affine_shapes(W, x.size(), db.size(), dy.size());
  const std::size_t m = dy.size();
  const std::size_t n = x.size();
  double* gw = dW.values().data();
  for (std::size_t r = 0; r < m; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    db[r] += g;
    double* gr = gw + r * n;
    for (std::size_t c = 0; c < n; ++c) gr[c] += g * x[c];
  }
  if (!dx.empty()) affine_input_backward(W, dy, dx);
}

void affine_input_backward(const Tensor& W, std::span<const double> dy,
                           std::span<double> dx) {
  const std::size_t n = dx.size();
  if (W.rank() != 2 || W.shape()[0] != dy.size() || W.shape()[1] != n) {
    throw ShapeError("affine backward: W" + shape_string(W.shape()));
  }
  const double* w = W.values().data();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* wr = w + r * n;
    for (std::size_t c = 0; c < n; ++c) dx[c] += g * wr[c];
  }
}

double sigmoid(double x) {
  // Branches keep exp() from overflowing for large |x|.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void sigmoid(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
}

void tanh(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
}

Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  sigmoid(x.values(), y.values());
  return y;
}

Tensor tanh(const Tensor& x) {
  Tensor y(x.shape());
  tanh(x.values(), y.values());
  return y;
}

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("log_sum_exp of empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < logits.size(); ++i) probs[i] *= inv;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  softmax(logits, probs);
  return probs;
}

NllResult log_softmax_nll(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw std::out_of_range("log_softmax_nll: target " + std::to_string(target) +
                            " outside " + std::to_string(logits.size()) +
                            " logits");
  }
  NllResult result;
  result.loss = log_sum_exp(logits) - logits[target];
  result.grad = softmax(logits);
  result.grad[target] -= 1.0;
  return result;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("sample_categorical: no outcomes");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("sample_categorical: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("sample_categorical: probabilities sum to " +
                                std::to_string(total));
  }
  const double u = rng.uniform();
  double cdf = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cdf += probs[i];
    last_positive = i;
    if (u < cdf) return i;
  }
  // u landed in the rounding gap above the final cdf value.
  return last_positive;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace cslm::ops
