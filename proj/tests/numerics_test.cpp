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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "cslm/checkpoint.hpp"
#include "cslm/errors.hpp"
#include "cslm/grad_check.hpp"
#include "cslm/ops.hpp"
#include "cslm/rng.hpp"
#include "cslm/tensor.hpp"

using namespace cslm;

TEST(Affine, IdentityWeightsReturnInput) {
  Tensor W = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor b({3});
  std::vector<double> x = {0.5, -2.0, 7.0};
  EXPECT_EQ(ops::affine(W, x, b), x);
}

TEST(Affine, ZeroWeightsReturnBias) {
  Tensor W({2, 3});
  Tensor b = Tensor::vector({4.0, -1.5});
  std::vector<double> x = {1, 2, 3};
  EXPECT_EQ(ops::affine(W, x, b), (std::vector<double>{4.0, -1.5}));
}

TEST(Affine, HandArithmetic) {
  Tensor W = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor b({2});
  std::vector<double> x = {1, 1};
  EXPECT_EQ(ops::affine(W, x, b), (std::vector<double>{3, 7}));
}

TEST(Affine, ShapeMismatchThrows) {
  Tensor W({2, 3});
  Tensor b({2});
  std::vector<double> x = {1, 2};
  EXPECT_THROW(ops::affine(W, x, b), ShapeError);
}

TEST(Activations, ValuesAtZero) {
  EXPECT_EQ(ops::sigmoid(0.0), 0.5);
  EXPECT_EQ(std::tanh(0.0), 0.0);
}

TEST(Activations, SigmoidSymmetry) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-40, 40);
    EXPECT_NEAR(ops::sigmoid(x) + ops::sigmoid(-x), 1.0, 1e-15);
  }
}

TEST(Activations, SaturateWithoutNaN) {
  for (double x : {-1e6, -745.0, 745.0, 1e6}) {
    EXPECT_TRUE(std::isfinite(ops::sigmoid(x)));
  }
  EXPECT_EQ(ops::sigmoid(1e6), 1.0);
  EXPECT_EQ(ops::sigmoid(-1e6), 0.0);
}

TEST(Activations, DerivativesMatchCentralDifference) {
  const double x = 0.3, h = 1e-5;
  const double fd_tanh = (std::tanh(x + h) - std::tanh(x - h)) / (2 * h);
  EXPECT_NEAR(ops::tanh_grad_from_output(std::tanh(x)), fd_tanh, 1e-8);
  const double fd_sig = (ops::sigmoid(x + h) - ops::sigmoid(x - h)) / (2 * h);
  EXPECT_NEAR(ops::sigmoid_grad_from_output(ops::sigmoid(x)), fd_sig, 1e-8);
}

TEST(LogSoftmaxNll, UniformLogits) {
  std::vector<double> logits(4, 0.7);
  EXPECT_NEAR(ops::log_softmax_nll(logits, 2).loss, std::log(4.0), 1e-12);
}

TEST(LogSoftmaxNll, LargeLogitsDoNotOverflow) {
  std::vector<double> logits = {1000.0, 0.0};
  auto r = ops::log_softmax_nll(logits, 0);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  auto r1 = ops::log_softmax_nll(logits, 1);
  EXPECT_NEAR(r1.loss, 1000.0, 1e-9);
}

TEST(LogSoftmaxNll, DirectArithmetic) {
  std::vector<double> logits = {1, 2, 3};
  const double expected = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 3.0;
  auto r = ops::log_softmax_nll(logits, 2);
  EXPECT_NEAR(r.loss, expected, 1e-14);
  // gradient = softmax - one_hot
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(r.grad[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(r.grad[2], std::exp(3.0) / z - 1.0, 1e-15);
}

TEST(LogSoftmaxNll, TargetOutOfRange) {
  std::vector<double> logits = {1, 2};
  EXPECT_THROW(ops::log_softmax_nll(logits, 2), std::out_of_range);
}

TEST(Softmax, NormalizedForRandomLogits) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(1 + rng.uniform_index(50));
    for (double& v : logits) v = rng.uniform(-300, 300);
    auto p = ops::softmax(logits);
    double sum = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(GradCheck, QuadraticLossIsExact) {
  Parameter theta("theta", Tensor::vector({0.3, -1.2, 2.5, 0.0}));
  std::vector<Parameter*> params = {&theta};
  auto loss = [&] {
    double l = 0.0;
    for (std::size_t i = 0; i < theta.value.size(); ++i) {
      l += 0.5 * theta.value[i] * theta.value[i];
      theta.grad[i] += theta.value[i];
    }
    return l;
  };
  auto report = grad_check(loss, params, {.tolerance = 1e-10});
  EXPECT_TRUE(report.passed()) << report.to_string();
  for (std::size_t i = 0; i < theta.value.size(); ++i) EXPECT_EQ(theta.grad[i], theta.value[i]);
}

TEST(GradCheck, ConstantLossHasZeroGradient) {
  Parameter theta("theta", Tensor::vector({1.0, 2.0}));
  std::vector<Parameter*> params = {&theta};
  auto report = grad_check([] { return 3.0; }, params);
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(theta.grad[0], 0.0);
  EXPECT_EQ(theta.grad[1], 0.0);
}

TEST(GradCheck, FlagsWrongGradient) {
  Parameter theta("theta", Tensor::vector({1.0, 2.0}));
  std::vector<Parameter*> params = {&theta};
  auto loss = [&] {
    theta.grad[0] += 2.0 * theta.value[0];  // wrong: true derivative is 3 x^2
    return theta.value[0] * theta.value[0] * theta.value[0];
  };
  EXPECT_FALSE(grad_check(loss, params).passed());
}

// affine -> tanh -> affine -> nll over random small shapes.
TEST(GradCheck, ComposedOpsOnRandomShapes) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(5), m = 1 + rng.uniform_index(5),
                      v = 2 + rng.uniform_index(5);
    Parameter W1("W1", Tensor({m, n})), b1("b1", Tensor({m})), W2("W2", Tensor({v, m})),
        b2("b2", Tensor({v})), x("x", Tensor({n}));
    for (Parameter* p : {&W1, &b1, &W2, &b2, &x}) {
      for (double& e : p->value.values()) e = rng.uniform(-1, 1);
    }
    const std::size_t target = rng.uniform_index(v);
    std::vector<Parameter*> params = {&W1, &b1, &W2, &b2, &x};
    auto loss = [&] {
      auto hpre = ops::affine(W1.value, x.value.values(), b1.value);
      std::vector<double> h(m);
      ops::tanh(hpre, h);
      auto logits = ops::affine(W2.value, h, b2.value);
      auto r = ops::log_softmax_nll(logits, target);
      std::vector<double> dh(m, 0.0);
      ops::affine_backward(W2.value, h, r.grad, W2.grad, b2.grad, dh);
      for (std::size_t k = 0; k < m; ++k) dh[k] *= ops::tanh_grad_from_output(h[k]);
      std::vector<double> dx(n, 0.0);
      ops::affine_backward(W1.value, x.value.values(), dh, W1.grad, b1.grad, dx);
      for (std::size_t k = 0; k < n; ++k) x.grad[k] += dx[k];
      return r.loss;
    };
    auto report = grad_check(loss, params);
    EXPECT_TRUE(report.passed()) << report.to_string();
  }
}

TEST(SampleCategorical, OneHotAlwaysReturnsThatIndex) {
  Rng rng(5);
  std::vector<double> probs = {0, 0, 1, 0};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(ops::sample_categorical(probs, rng), 2u);
}

TEST(SampleCategorical, UniformPairFrequency) {
  Rng rng(6);
  std::vector<double> probs = {0.5, 0.5};
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += ops::sample_categorical(probs, rng) == 0;
  EXPECT_NEAR(zeros / 10000.0, 0.5, 0.02);
}

TEST(SampleCategorical, ReproducibleForSeed) {
  std::vector<double> probs = {0.1, 0.2, 0.3, 0.4};
  Rng a(99), b(99);
  for (int i = 0; i < 500; ++i) {
    EXPECT_EQ(ops::sample_categorical(probs, a), ops::sample_categorical(probs, b));
  }
}

TEST(SampleCategorical, RejectsUnnormalizedInput) {
  Rng rng(1);
  std::vector<double> probs = {0.5, 0.6};
  EXPECT_THROW(ops::sample_categorical(probs, rng), std::invalid_argument);
  std::vector<double> negative = {1.5, -0.5};
  EXPECT_THROW(ops::sample_categorical(negative, rng), std::invalid_argument);
}

// The 10000th output of a default-seeded mt19937_64 is fixed by the standard.
TEST(Rng, EngineMatchesStandardSequence) {
  Rng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, UniformIndexStaysInRange) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.uniform_index(7), 7u);
}

TEST(Checkpoint, ByteExactRoundTrip) {
  Parameter a("a.weight", Tensor::matrix(2, 3, {0.1, -0.0, 1e-310, 3.0, -2.5e300, 1.0 / 3.0}));
  Parameter b("b", Tensor::vector({std::numeric_limits<double>::min(), 42.0}));
  std::vector<Parameter*> params = {&a, &b};
  std::ostringstream first;
  write_parameters(first, params);

  Parameter a2("a.weight", Tensor({2, 3})), b2("b", Tensor({2}));
  std::vector<Parameter*> loaded = {&a2, &b2};
  std::istringstream in(first.str());
  load_parameters(in, loaded);
  for (std::size_t i = 0; i < a.value.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.value[i]), std::bit_cast<std::uint64_t>(a2.value[i]));
  }
  std::ostringstream second;
  write_parameters(second, loaded);
  EXPECT_EQ(first.str(), second.str());
}

TEST(Checkpoint, RejectsShapeMismatch) {
  Parameter a("a", Tensor({2}));
  std::vector<Parameter*> params = {&a};
  std::ostringstream out;
  write_parameters(out, params);
  Parameter wrong("a", Tensor({3}));
  std::vector<Parameter*> target = {&wrong};
  std::istringstream in(out.str());
  EXPECT_THROW(load_parameters(in, target), DataError);
}

TEST(Checkpoint, DetectsTruncation) {
  Parameter a("a", Tensor::vector({1, 2, 3}));
  std::vector<Parameter*> params = {&a};
  std::ostringstream out;
  write_parameters(out, params);
  std::string bytes = out.str();
  bytes.resize(bytes.size() - 4);
  std::istringstream in(bytes);
  EXPECT_THROW(read_parameters(in), DataError);
}
