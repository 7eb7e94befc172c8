// Copyright (c) the mtlat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mtlat/tape.h"

#include <cmath>

#include "gtest/gtest.h"
#include "mtlat/errors.h"
#include "mtlat/rng.h"

namespace mtlat {
namespace {

NdArray RandomArray(std::vector<size_t> shape, Rng& rng, double lo = -1.0,
                    double hi = 1.0) {
  NdArray a(std::move(shape));
  for (double& v : a.data) v = rng.Uniform(lo, hi);
  return a;
}

TEST(ForwardTest, ReluDefinition) {
  Tape tape;
  ValueId x = tape.Leaf(NdArray::FromVector({-1.0, 0.0, 2.0}));
  const NdArray& y = tape.Value(tape.Relu(x));
  EXPECT_DOUBLE_EQ(0.0, y[0]);
  EXPECT_DOUBLE_EQ(0.0, y[1]);
  EXPECT_DOUBLE_EQ(2.0, y[2]);
}

TEST(ForwardTest, SoftmaxCrossEntropyUniformCase) {
  Tape tape;
  ValueId z = tape.Leaf(NdArray({1, 2}, {0.0, 0.0}));
  ValueId y = tape.Leaf(NdArray({1, 2}, {0.5, 0.5}));
  const NdArray& loss = tape.Value(tape.SoftmaxCrossEntropy(z, y));
  EXPECT_NEAR(std::log(2.0), loss[0], 1e-15);
}

TEST(ForwardTest, SoftmaxCrossEntropyMatchesLogForm) {
  Rng rng(7);
  Tape tape;
  const NdArray z = RandomArray({4, 6}, rng, -5.0, 5.0);
  NdArray y({4, 6});
  for (size_t r = 0; r < 4; ++r) {
    double sum = 0.0;
    for (size_t j = 0; j < 6; ++j) {
      y[r * 6 + j] = rng.Uniform(0.01, 1.0);
      sum += y[r * 6 + j];
    }
    for (size_t j = 0; j < 6; ++j) y[r * 6 + j] /= sum;
  }
  ValueId zi = tape.Leaf(z), yi = tape.Leaf(y);
  const double loss = tape.Value(tape.SoftmaxCrossEntropy(zi, yi))[0];
  EXPECT_GE(loss, 0.0);

  double want = 0.0;
  for (size_t r = 0; r < 4; ++r) {
    double denom = 0.0;
    for (size_t j = 0; j < 6; ++j) denom += std::exp(z[r * 6 + j]);
    for (size_t j = 0; j < 6; ++j) {
      want -= y[r * 6 + j] * std::log(std::exp(z[r * 6 + j]) / denom);
    }
  }
  want /= 4.0;
  EXPECT_NEAR(want, loss, 1e-12);
}

TEST(ForwardTest, Conv2dOnesKernelCenterIsNine) {
  Tape tape;
  ValueId x = tape.Leaf(NdArray::Full({1, 3, 3, 1}, 1.0));
  ValueId w = tape.Leaf(NdArray::Full({3, 3, 1, 1}, 1.0));
  const NdArray& y = tape.Value(tape.Conv2d(x, w, 1));
  ASSERT_EQ(std::vector<size_t>({1, 3, 3, 1}), y.shape);
  EXPECT_DOUBLE_EQ(9.0, y[4]);  // center
  EXPECT_DOUBLE_EQ(4.0, y[0]);  // corner sees a 2x2 window
}

TEST(ForwardTest, ShapeErrorsNameOpAndShapes) {
  Tape tape;
  ValueId a = tape.Leaf(NdArray({2, 3}));
  ValueId b = tape.Leaf(NdArray({4, 2}));
  try {
    tape.MatMul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(std::string::npos, msg.find("matmul"));
    EXPECT_NE(std::string::npos, msg.find("(2, 3)"));
    EXPECT_NE(std::string::npos, msg.find("(4, 2)"));
  }
  ValueId img = tape.Leaf(NdArray({1, 4, 4, 3}));
  ValueId ker = tape.Leaf(NdArray({3, 3, 2, 8}));
  EXPECT_THROW(tape.Conv2d(img, ker, 1), ShapeError);
  EXPECT_THROW(tape.AddBias(a, tape.Leaf(NdArray({5}))), ShapeError);
  EXPECT_THROW(tape.Reshape(a, {7}), ShapeError);
}

TEST(BackwardTest, SumGivesAllOnes) {
  Tape tape;
  ValueId x = tape.Leaf(NdArray({2, 3, 2}, std::vector<double>(12, 0.25)));
  ValueId loss = tape.Sum(x);
  Tape::Gradients g = tape.Backward(loss);
  const NdArray gx = g.Get(tape, x);
  for (size_t i = 0; i < gx.size(); ++i) EXPECT_DOUBLE_EQ(1.0, gx[i]);
}

TEST(BackwardTest, NonScalarLossRejected) {
  Tape tape;
  ValueId x = tape.Leaf(NdArray({2, 2}));
  EXPECT_THROW(tape.Backward(x), ContractError);
}

TEST(BackwardTest, SoftmaxGradSumsToZeroForNormalizedLabels) {
  Rng rng(8);
  Tape tape;
  ValueId z = tape.Leaf(RandomArray({3, 5}, rng, -3.0, 3.0));
  NdArray y({3, 5});
  for (size_t r = 0; r < 3; ++r) {
    double sum = 0.0;
    for (size_t j = 0; j < 5; ++j) {
      y[r * 5 + j] = rng.Uniform(0.0, 1.0);
      sum += y[r * 5 + j];
    }
    for (size_t j = 0; j < 5; ++j) y[r * 5 + j] /= sum;
  }
  ValueId yi = tape.Leaf(y);
  Tape::Gradients g = tape.Backward(tape.SoftmaxCrossEntropy(z, yi));
  const NdArray gz = g.Get(tape, z);
  for (size_t r = 0; r < 3; ++r) {
    double sum = 0.0;
    for (size_t j = 0; j < 5; ++j) sum += gz[r * 5 + j];
    EXPECT_NEAR(0.0, sum, 1e-12);
  }
}

TEST(BackwardTest, UnreachedLeafGetsZeros) {
  Tape tape;
  ValueId used = tape.Leaf(NdArray::FromVector({1.0, 2.0}));
  ValueId unused = tape.Leaf(NdArray::FromVector({3.0, 4.0, 5.0}));
  Tape::Gradients g = tape.Backward(tape.Sum(used));
  const NdArray gu = g.Get(tape, unused);
  ASSERT_EQ(3u, gu.size());
  for (size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(0.0, gu[i]);
}

TEST(BackwardTest, AccumulatesFanOut) {
  // loss = sum(matmul(x, x)) uses x twice; both paths must accumulate.
  Tape tape;
  NdArray x0({2, 2}, {1.0, 2.0, 3.0, 4.0});
  ValueId x = tape.Leaf(x0);
  ValueId loss = tape.Sum(tape.MatMul(x, x));
  Tape::Gradients g = tape.Backward(loss);
  const NdArray gx = g.Get(tape, x);

  auto f = [](const NdArray& v) {
    double acc = 0.0;
    for (size_t i = 0; i < 2; ++i) {
      for (size_t j = 0; j < 2; ++j) {
        for (size_t p = 0; p < 2; ++p) acc += v[i * 2 + p] * v[p * 2 + j];
      }
    }
    return acc;
  };
  const double err = GradCheck(f, gx, x0, 1e-6);
  EXPECT_LT(err, 1e-8);
}

TEST(BackwardTest, SeededBackwardIsLinearInSeed) {
  Rng rng(9);
  Tape tape;
  const NdArray x0 = RandomArray({3, 4}, rng);
  const NdArray w0 = RandomArray({4, 2}, rng);
  ValueId x = tape.Leaf(x0);
  ValueId w = tape.Leaf(w0);
  ValueId y = tape.Relu(tape.MatMul(x, w));

  const NdArray s1 = RandomArray({3, 2}, rng);
  const NdArray s2 = RandomArray({3, 2}, rng);
  NdArray s12({3, 2});
  for (size_t i = 0; i < s12.size(); ++i) s12[i] = 2.0 * s1[i] - 3.0 * s2[i];

  const NdArray g1 = tape.BackwardSeeded(y, s1).Get(tape, x);
  const NdArray g2 = tape.BackwardSeeded(y, s2).Get(tape, x);
  const NdArray g12 = tape.BackwardSeeded(y, s12).Get(tape, x);
  for (size_t i = 0; i < g12.size(); ++i) {
    EXPECT_NEAR(2.0 * g1[i] - 3.0 * g2[i], g12[i], 1e-12);
  }
}

TEST(BackwardTest, ScalarMulScalesGradient) {
  Rng rng(10);
  Tape tape;
  const NdArray x0 = RandomArray({5}, rng);
  ValueId x = tape.Leaf(x0);
  Tape::Gradients g = tape.Backward(tape.Sum(tape.ScalarMul(x, -2.5)));
  const NdArray gx = g.Get(tape, x);
  for (size_t i = 0; i < gx.size(); ++i) EXPECT_DOUBLE_EQ(-2.5, gx[i]);
}

TEST(BackwardTest, WantedPruningMatchesFullBackward) {
  Rng rng(11);
  Tape tape;
  ValueId x = tape.Leaf(RandomArray({2, 6}, rng));
  ValueId w1 = tape.Leaf(RandomArray({6, 4}, rng));
  ValueId w2 = tape.Leaf(RandomArray({4, 3}, rng));
  ValueId h = tape.Relu(tape.MatMul(x, w1));
  ValueId loss = tape.Sum(tape.MatMul(h, w2));

  Tape::Gradients full = tape.Backward(loss);
  Tape::Gradients pruned = tape.Backward(loss, {x});
  const NdArray a = full.Get(tape, x);
  const NdArray b = pruned.Get(tape, x);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
  // w2 was not requested; the pruned pass should not have produced it.
  EXPECT_EQ(nullptr, pruned.MaybeGet(w2));
}

// The finite-difference oracle for a random two-layer network, run against
// every primitive in the stack: conv, bias, relu, pool, reshape, matmul,
// softmax cross entropy.
TEST(GradCheckTest, RandomTwoLayerNetwork) {
  Rng rng(12);
  const NdArray x0 = RandomArray({2, 6, 6, 2}, rng, 0.05, 0.95);
  const NdArray w0 = RandomArray({3, 3, 2, 4}, rng, -0.5, 0.5);
  const NdArray b0 = RandomArray({4}, rng, -0.1, 0.1);
  const NdArray w1 = RandomArray({3 * 3 * 4, 3}, rng, -0.5, 0.5);
  NdArray labels({2, 3});
  labels[0 * 3 + 1] = 1.0;
  labels[1 * 3 + 2] = 1.0;

  auto loss_at = [&](const NdArray& x, const NdArray& cw, const NdArray& cb,
                     const NdArray& fw) {
    Tape tape;
    ValueId xi = tape.Leaf(x);
    ValueId conv = tape.AddBias(tape.Conv2d(xi, tape.Leaf(cw), 1),
                                tape.Leaf(cb));
    ValueId pooled = tape.MaxPool2(tape.Relu(conv));
    ValueId flat = tape.Reshape(pooled, {2, 3 * 3 * 4});
    ValueId logits = tape.MatMul(flat, tape.Leaf(fw));
    return tape.Value(
        tape.SoftmaxCrossEntropy(logits, tape.Leaf(labels)))[0];
  };

  Tape tape;
  ValueId xi = tape.Leaf(x0);
  ValueId cw = tape.Leaf(w0);
  ValueId cb = tape.Leaf(b0);
  ValueId fw = tape.Leaf(w1);
  ValueId conv = tape.AddBias(tape.Conv2d(xi, cw, 1), cb);
  ValueId pooled = tape.MaxPool2(tape.Relu(conv));
  ValueId flat = tape.Reshape(pooled, {2, 3 * 3 * 4});
  ValueId logits = tape.MatMul(flat, fw);
  ValueId loss = tape.SoftmaxCrossEntropy(logits, tape.Leaf(labels));
  Tape::Gradients g = tape.Backward(loss);

  const double h = 1e-5;
  EXPECT_LT(GradCheck([&](const NdArray& v) { return loss_at(v, w0, b0, w1); },
                      g.Get(tape, xi), x0, h, 60, 1),
            1e-5);
  EXPECT_LT(GradCheck([&](const NdArray& v) { return loss_at(x0, v, b0, w1); },
                      g.Get(tape, cw), w0, h, 60, 2),
            1e-5);
  EXPECT_LT(GradCheck([&](const NdArray& v) { return loss_at(x0, w0, v, w1); },
                      g.Get(tape, cb), b0, h),
            1e-5);
  EXPECT_LT(GradCheck([&](const NdArray& v) { return loss_at(x0, w0, b0, v); },
                      g.Get(tape, fw), w1, h, 60, 3),
            1e-5);
}

TEST(GradCheckTest, QuadraticIsExact) {
  const NdArray x0 = NdArray::FromVector({3.0});
  auto f = [](const NdArray& v) { return v[0] * v[0]; };
  const NdArray analytic = NdArray::FromVector({6.0});
  EXPECT_LT(GradCheck(f, analytic, x0, 1e-5), 1e-9);
}

TEST(GradCheckTest, ReluKinkExcluded) {
  // f = sum(relu(x)) at a point with an exact zero; the kink coordinate is
  // skipped, the rest must check out.
  const NdArray x0 = NdArray::FromVector({-0.7, 0.0, 1.3});
  auto f = [](const NdArray& v) {
    double acc = 0.0;
    for (double x : v.data) acc += x > 0.0 ? x : 0.0;
    return acc;
  };
  // Subgradient at 0 is defined as 0.
  const NdArray analytic = NdArray::FromVector({0.0, 0.0, 1.0});
  const auto skip = [&](size_t i) { return x0[i] == 0.0; };
  EXPECT_LT(GradCheck(f, analytic, x0, 1e-5, 0, 0, skip), 1e-9);
}

TEST(DeterminismTest, IdenticalGraphsBitIdentical) {
  auto run = [] {
    Rng rng(13);
    Tape tape;
    ValueId x = tape.Leaf(RandomArray({3, 8, 8, 3}, rng, 0.0, 1.0));
    ValueId w = tape.Leaf(RandomArray({3, 3, 3, 8}, rng, -0.3, 0.3));
    ValueId y = tape.MaxPool2(tape.Relu(tape.Conv2d(x, w, 1)));
    return tape.Value(tape.Sum(y))[0];
  };
  const double a = run();
  const double b = run();
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace mtlat
