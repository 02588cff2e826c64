// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "stemit/rng.hpp"
#include "stemit/tensor.hpp"

using stemit::DimensionError;
using stemit::SeededRng;
using stemit::num::Tensor;
namespace num = stemit::num;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t(1, 2), 1.5);
}

TEST(Tensor, MatmulIdentity) {
  const Tensor b = Tensor::matrix({{3, 4}, {5, 6}});
  EXPECT_EQ(num::matmul(Tensor::identity(2), b), b);
}

TEST(Tensor, MatmulHandComputed) {
  const Tensor c = num::matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5}, {6}}));
  ASSERT_EQ(c.shape(), (num::Shape{2, 1}));
  EXPECT_EQ(c(0, 0), 17.0);
  EXPECT_EQ(c(1, 0), 39.0);
}

TEST(Tensor, MatmulShapeErrorNamesBothShapes) {
  try {
    num::matmul(Tensor({2, 3}), Tensor({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_GE(std::count(msg.begin(), msg.end(), 'x'), 2) << msg;
  }
}

TEST(Tensor, MatmulAssociativeOnRandomChains) {
  SeededRng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 1 + rng.below(6), q = 1 + rng.below(6), r = 1 + rng.below(6), s = 1 + rng.below(6);
    const Tensor a = Tensor::normal({p, q}, rng), b = Tensor::normal({q, r}, rng), c = Tensor::normal({r, s}, rng);
    const Tensor left = num::matmul(num::matmul(a, b), c);
    const Tensor right = num::matmul(a, num::matmul(b, c));
    double diff = 0.0;
    for (std::size_t i = 0; i < left.size(); ++i) diff += (left[i] - right[i]) * (left[i] - right[i]);
    EXPECT_LE(std::sqrt(diff), 1e-9 * std::max(1.0, num::frobenius_norm(left)));
  }
}

TEST(Tensor, Transpose) {
  const Tensor t = num::transpose(Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(t, Tensor::matrix({{1, 4}, {2, 5}, {3, 6}}));
}

TEST(Activations, Sigmoid) {
  EXPECT_EQ(num::sigmoid(0.0), 0.5);
  const double s = num::sigmoid(50.0);
  EXPECT_GT(s, 1.0 - 1e-9);
  EXPECT_LE(s, 1.0);
  SeededRng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-30.0, 30.0);
    EXPECT_NEAR(num::sigmoid(x) + num::sigmoid(-x), 1.0, 1e-15);
    EXPECT_GT(num::sigmoid(x), 0.0);
    EXPECT_LT(num::sigmoid(x), 1.0);
  }
  // No overflow for large negative inputs.
  EXPECT_GT(num::sigmoid(-700.0), 0.0);
  EXPECT_TRUE(std::isfinite(num::sigmoid(-1000.0)));
}

TEST(Activations, Hardswish) {
  EXPECT_EQ(num::hardswish(0.0), 0.0);
  EXPECT_EQ(num::hardswish(-3.0), 0.0);
  EXPECT_EQ(num::hardswish(3.0), 3.0);
  EXPECT_DOUBLE_EQ(num::hardswish(1.0), 2.0 / 3.0);
  EXPECT_EQ(num::hardswish(-5.0), 0.0);
  EXPECT_EQ(num::hardswish(7.0), 7.0);
}

TEST(Activations, Relu) {
  EXPECT_EQ(num::relu(vec({-1, 0, 2})), vec({0, 0, 2}));
  EXPECT_EQ(num::relu(vec({-1, -2, -0.5})), vec({0, 0, 0}));
  SeededRng rng(5);
  const Tensor x = Tensor::normal({50}, rng);
  const Tensor pos = num::relu(x);
  const Tensor neg = num::relu(num::map(x, [](double v) { return -v; }));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(pos[i] + neg[i], std::abs(x[i]));
}

TEST(Activations, MonotoneOnSortedInputs) {
  SeededRng rng(17);
  std::vector<double> xs(500);
  for (double& x : xs) x = rng.uniform(-8.0, 8.0);
  std::sort(xs.begin(), xs.end());
  const Tensor x = vec(xs);
  // hardswish is monotone only for x ≥ −1.5 (its minimum); sigmoid and relu everywhere.
  for (const Tensor& y : {num::sigmoid(x), num::relu(x)})
    for (std::size_t i = 1; i < y.size(); ++i) EXPECT_LE(y[i - 1], y[i]);
  const Tensor h = num::hardswish(x);
  for (std::size_t i = 1; i < h.size(); ++i)
    if (xs[i - 1] >= -1.5) {
      EXPECT_LE(h[i - 1], h[i]);
    }
}

TEST(Activations, GluGate) {
  SeededRng rng(2);
  const Tensor p = Tensor::normal({3, 4}, rng);
  const Tensor half = num::glu_gate(p, Tensor({3, 4}));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(half[i], 0.5 * p[i]);
  const Tensor zero = num::glu_gate(Tensor({3, 4}), Tensor::normal({3, 4}, rng));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  const Tensor g = num::glu_gate(vec({2.0}), vec({std::log(3.0)}));
  EXPECT_NEAR(g[0], 1.5, 1e-15);
  EXPECT_THROW(num::glu_gate(Tensor({2}), Tensor({3})), DimensionError);
}

TEST(ConvTime, SumKernelOverFullWindow) {
  const std::size_t w = 2, t = 4;
  const Tensor x({w, t, 1}, 1.0);
  const Tensor k({t, 1, 1}, 1.0);
  const Tensor y = num::conv_time(x, k, Tensor({1}));
  ASSERT_EQ(y.shape(), (num::Shape{w, 1, 1}));
  for (double v : y.data()) EXPECT_EQ(v, static_cast<double>(t));
}

TEST(ConvTime, IdentityKernel) {
  SeededRng rng(9);
  const Tensor x = Tensor::normal({3, 5, 2}, rng);
  Tensor k({1, 2, 2});
  k(0, 0, 0) = 1.0;
  k(0, 1, 1) = 1.0;
  EXPECT_EQ(num::conv_time(x, k, Tensor({2})), x);
}

TEST(ConvTime, HandComputedSlidingDot) {
  const Tensor x({1, 3, 1}, std::vector<double>{1, 2, 3});
  const Tensor k({2, 1, 1}, std::vector<double>{1, -1});
  const Tensor y = num::conv_time(x, k, Tensor({1}));
  EXPECT_EQ(y, Tensor({1, 2, 1}, std::vector<double>{-1, -1}));
}

TEST(ConvTime, BruteForceOracle) {
  SeededRng rng(21);
  const std::size_t w = 3, t = 6, cin = 2, cout = 3, kt = 3;
  const Tensor x = Tensor::normal({w, t, cin}, rng), k = Tensor::normal({kt, cin, cout}, rng);
  const Tensor b = Tensor::normal({cout}, rng);
  const Tensor y = num::conv_time(x, k, b);
  for (std::size_t v = 0; v < w; ++v)
    for (std::size_t s = 0; s + kt <= t; ++s)
      for (std::size_t c = 0; c < cout; ++c) {
        double acc = b[c];
        for (std::size_t d = 0; d < kt; ++d)
          for (std::size_t i = 0; i < cin; ++i) acc += x(v, s + d, i) * k(d, i, c);
        EXPECT_NEAR(y(v, s, c), acc, 1e-12);
      }
}

TEST(ConvTime, KernelLongerThanWindowIsDimensionError) {
  EXPECT_THROW(num::conv_time(Tensor({1, 2, 1}), Tensor({3, 1, 1}), Tensor({1})), DimensionError);
  EXPECT_THROW(num::conv_time(Tensor({1, 2, 1}), Tensor({1, 2, 1}), Tensor({1})), DimensionError);
}

TEST(SeededRng, IdenticalSeedsGiveIdenticalStreams) {
  SeededRng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  SeededRng r1(7), r2(7);
  EXPECT_EQ(Tensor::normal({4, 5}, r1), Tensor::normal({4, 5}, r2));
  EXPECT_EQ(Tensor::uniform({4, 5}, r1, -1, 1), Tensor::uniform({4, 5}, r2, -1, 1));
}

TEST(SeededRng, UniformAndNormalMoments) {
  SeededRng rng(123);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(SeededRng, PermutationIsABijection) {
  SeededRng rng(5);
  auto p = rng.permutation(100);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
}

TEST(SeededRng, DerivedSeedsDiffer) {
  EXPECT_NE(stemit::derive_seed(1, 1), stemit::derive_seed(1, 2));
  EXPECT_NE(stemit::derive_seed(1, 1), stemit::derive_seed(2, 1));
  EXPECT_EQ(stemit::derive_seed(9, 3), stemit::derive_seed(9, 3));
}
