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
#include <vector>

#include "cslm/rng.hpp"
#include "cslm/tensor.hpp"

namespace cslm::ops {

// y = W x + b for W of shape [m x n].
void affine(const Tensor& W, std::span<const double> x, const Tensor& b,
            std::span<double> y);
std::vector<double> affine(const Tensor& W, std::span<const double> x,
                           const Tensor& b);

// Backward of affine: dW += dy x^T, db += dy, dx += W^T dy. dx may be empty
// when the input gradient is not needed.
void affine_backward(const Tensor& W, std::span<const double> x,
                     std::span<const double> dy, Tensor& dW, Tensor& db,
                     std::span<double> dx);

// dx += W^T dy without touching parameter gradients.
void affine_input_backward(const Tensor& W, std::span<const double> dy,
                           std::span<double> dx);

double sigmoid(double x);
inline double sigmoid_grad_from_output(double y) { return y * (1.0 - y); }
inline double tanh_grad_from_output(double y) { return 1.0 - y * y; }

void sigmoid(std::span<const double> x, std::span<double> y);
void tanh(std::span<const double> x, std::span<double> y);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

double log_sum_exp(std::span<const double> logits);
void softmax(std::span<const double> logits, std::span<double> probs);
std::vector<double> softmax(std::span<const double> logits);

struct NllResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits = softmax - one_hot(target)
};

// -log softmax(logits)[target], with the max-subtraction trick.
NllResult log_softmax_nll(std::span<const double> logits, std::size_t target);

// Inverse-CDF draw. Throws std::invalid_argument when probs contain
// negatives or do not sum to 1 within 1e-9.
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);

double squared_norm(std::span<const double> v);

}  // namespace cslm::ops
