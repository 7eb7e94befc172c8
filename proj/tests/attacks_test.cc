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

#include "mtlat/attacks.h"

#include <cmath>

#include "gtest/gtest.h"
#include "mtlat/errors.h"
#include "mtlat/rng.h"
#include "mtlat/tape.h"

namespace mtlat {
namespace {

ModelParams TinyConv(uint64_t seed) {
  return InitModel(Arch::kSmallConv, 8, 8, 3, 4, seed);
}

NdArray RandomBatch(size_t b, uint64_t seed, double lo = 0.0,
                    double hi = 1.0) {
  Rng rng(seed);
  NdArray x({b, 8, 8, 3});
  for (double& v : x.data) v = rng.Uniform(lo, hi);
  return x;
}

std::vector<int> RandomLabels(size_t b, size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<int> y(b);
  for (int& v : y) v = static_cast<int>(rng.UniformInt(n));
  return y;
}

TEST(FgsmTest, EpsilonZeroIsIdentity) {
  const ModelParams m = TinyConv(1);
  const NdArray x = RandomBatch(3, 2);
  const auto advs = FgsmUntargeted(m, x, {0, 1, 2}, 0.0);
  for (size_t i = 0; i < advs.size(); ++i) {
    EXPECT_EQ(advs[i].original.data, advs[i].adversarial.data);
  }
}

TEST(FgsmTest, UnclippedPixelsMoveExactlyEpsilon) {
  const ModelParams m = TinyConv(3);
  // Interior pixel values so the [0,1] clip never binds at eps = 0.1.
  const NdArray x = RandomBatch(2, 4, 0.2, 0.8);
  NdArray targets({2, 4});
  targets[1] = 1.0;
  targets[4 + 2] = 1.0;
  const NdArray grad = InputGradient(m, x, targets);
  const double eps = 0.1;
  const auto advs = FgsmTargeted(m, x, targets, eps);
  size_t moved = 0;
  for (size_t i = 0; i < advs.size(); ++i) {
    for (size_t j = 0; j < advs[i].adversarial.size(); ++j) {
      const double d =
          advs[i].adversarial[j] - advs[i].original[j];
      if (grad[i * 192 + j] != 0.0) {
        EXPECT_DOUBLE_EQ(eps, std::abs(d));
        ++moved;
      } else {
        EXPECT_DOUBLE_EQ(0.0, d);
      }
    }
  }
  EXPECT_GT(moved, 100u);  // gradient reaches nearly every pixel
}

TEST(FgsmTest, NegativeEpsilonRejected) {
  const ModelParams m = TinyConv(5);
  const NdArray x = RandomBatch(1, 6);
  EXPECT_THROW(FgsmUntargeted(m, x, {0}, -0.01), ContractError);
}

TEST(FgsmTest, UntargetedAscendsLossOnLinearModel) {
  // For a linear model, L(x + eps*sign(grad)) >= L(x) exactly (convexity of
  // cross entropy in x through linear logits).
  Rng rng(6);
  NdArray w({12, 3});
  for (double& v : w.data) v = rng.Uniform(-1.0, 1.0);
  NdArray x0({1, 12});
  for (double& v : x0.data) v = rng.Uniform(0.2, 0.8);
  NdArray y({1, 3});
  y[0] = 1.0;

  auto loss_at = [&](const NdArray& x) {
    Tape tape;
    ValueId xi = tape.Leaf(x);
    ValueId logits = tape.MatMul(xi, tape.Leaf(w));
    return tape.Value(tape.SoftmaxCrossEntropy(logits, tape.Leaf(y)))[0];
  };
  Tape tape;
  ValueId xi = tape.Leaf(x0);
  ValueId loss = tape.SoftmaxCrossEntropy(tape.MatMul(xi, tape.Leaf(w)),
                                          tape.Leaf(y));
  const NdArray g = tape.Backward(loss, {xi}).Get(tape, xi);
  NdArray adv = x0;
  for (size_t i = 0; i < adv.size(); ++i) {
    adv[i] += 0.05 * (g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0));
  }
  EXPECT_GE(loss_at(adv), loss_at(x0));
}

TEST(PgdTest, OneStepWithFullStepEqualsFgsm) {
  const ModelParams m = TinyConv(7);
  const NdArray x = RandomBatch(4, 8);
  const std::vector<int> labels = {0, 1, 2, 3};
  const double eps = 0.03;
  AttackBudget budget;
  budget.epsilon = eps;
  budget.iterations = 1;
  budget.step_size = eps;
  const auto pgd = Pgd(m, x, labels, budget);
  const auto fgsm = FgsmUntargeted(m, x, labels, eps);
  for (size_t i = 0; i < pgd.size(); ++i) {
    EXPECT_EQ(fgsm[i].adversarial.data, pgd[i].adversarial.data);
  }
}

TEST(PgdTest, BudgetRespectedOverRandomCases) {
  const ModelParams m = TinyConv(9);
  Rng rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    const double eps = rng.Uniform(0.0, 0.1);
    const NdArray x = RandomBatch(5, 11 + rep);
    const auto labels = RandomLabels(5, 4, 12 + rep);
    AttackBudget budget;
    budget.epsilon = eps;
    budget.iterations = 5;
    const auto advs = Pgd(m, x, labels, budget);
    for (const auto& a : advs) {
      EXPECT_LE(a.MaxAbsDelta(), eps + 1e-12);
      for (double v : a.adversarial.data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(PgdTest, BadStepSizeRejected) {
  const ModelParams m = TinyConv(13);
  const NdArray x = RandomBatch(1, 14);
  AttackBudget budget;
  budget.step_size = -1.0;
  EXPECT_THROW(Pgd(m, x, {0}, budget), ContractError);
}

TEST(PgdLlTest, UniformLogitsBreakTiesToLowestIndex) {
  ModelParams m = TinyConv(15);
  for (NdArray& p : m.params) {
    for (double& v : p.data) v = 0.0;  // logits identically zero
  }
  const NdArray x = RandomBatch(1, 16);
  NdArray one({8, 8, 3}, std::vector<double>(x.data.begin(), x.data.end()));
  EXPECT_EQ(0, LeastLikelyClass(m, one));
}

TEST(PgdLlTest, TargetNeverEqualsArgmaxOnNonUniformLogits) {
  const ModelParams m = TinyConv(17);
  for (int i = 0; i < 10; ++i) {
    const NdArray x = RandomBatch(1, 18 + i);
    NdArray one({8, 8, 3}, std::vector<double>(x.data.begin(), x.data.end()));
    const NdArray logits = PredictLogits(m, x);
    size_t argmax = 0;
    for (size_t j = 1; j < 4; ++j) {
      if (logits[j] > logits[argmax]) argmax = j;
    }
    EXPECT_NE(static_cast<int>(argmax), LeastLikelyClass(m, one));
  }
}

TEST(MiFgsmTest, ZeroDecayMatchesIterativeFgsmTrajectory) {
  const ModelParams m = TinyConv(19);
  const NdArray x = RandomBatch(3, 20);
  const auto labels = RandomLabels(3, 4, 21);
  AttackBudget budget;
  budget.epsilon = 0.06;
  budget.iterations = 4;
  budget.mi_decay = 0.0;
  const auto advs = MiFgsm(m, x, labels, budget);

  // Reference: plain iterative FGSM with step eps/T in delta space.
  NdArray targets({3, 4});
  for (size_t i = 0; i < 3; ++i) {
    targets[i * 4 + static_cast<size_t>(labels[i])] = 1.0;
  }
  const double step = budget.epsilon / budget.iterations;
  NdArray delta(x.shape);
  NdArray iterate = x;
  for (int it = 0; it < budget.iterations; ++it) {
    const NdArray g = InputGradient(m, iterate, targets);
    for (size_t i = 0; i < delta.size(); ++i) {
      const double s = g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
      delta[i] = std::clamp(delta[i] + step * s, -budget.epsilon,
                            budget.epsilon);
      iterate[i] = std::clamp(x[i] + delta[i], 0.0, 1.0);
    }
  }
  for (size_t i = 0; i < 3; ++i) {
    for (size_t j = 0; j < 192; ++j) {
      EXPECT_DOUBLE_EQ(iterate[i * 192 + j], advs[i].adversarial[j]);
    }
  }
}

TEST(MiFgsmTest, DeltaWithinBall) {
  const ModelParams m = TinyConv(22);
  const NdArray x = RandomBatch(4, 23);
  AttackBudget budget;
  budget.epsilon = 0.08;
  budget.iterations = 10;
  const auto advs = MiFgsm(m, x, RandomLabels(4, 4, 24), budget);
  for (const auto& a : advs) {
    EXPECT_LE(a.MaxAbsDelta(), budget.epsilon + 1e-12);
  }
}

TEST(CwTest, AlreadyMisclassifiedWithMarginReturnsZeroDelta) {
  const ModelParams m = TinyConv(25);
  const NdArray x = RandomBatch(1, 26);
  const NdArray logits = PredictLogits(m, x);
  // Label = least likely class; the clean margin is as large as it gets.
  size_t worst = 0, best = 0;
  for (size_t j = 1; j < 4; ++j) {
    if (logits[j] < logits[worst]) worst = j;
    if (logits[j] > logits[best]) best = j;
  }
  const double margin = logits[best] - logits[worst];
  ASSERT_GT(margin, 0.01);
  const auto advs =
      CwL2(m, x, {static_cast<int>(worst)}, 10, margin * 0.5);
  EXPECT_TRUE(advs[0].success);
  EXPECT_EQ(advs[0].original.data, advs[0].adversarial.data);
  EXPECT_DOUBLE_EQ(0.0, advs[0].L2Delta());
}

TEST(CwTest, OutputInUnitRangeAndDeterministic) {
  const ModelParams m = TinyConv(27);
  const NdArray x = RandomBatch(3, 28);
  const auto labels = RandomLabels(3, 4, 29);
  const auto a = CwL2(m, x, labels, 15, 0.5);
  const auto b = CwL2(m, x, labels, 15, 0.5);
  for (size_t i = 0; i < a.size(); ++i) {
    for (double v : a[i].adversarial.data) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(a[i].adversarial.data, b[i].adversarial.data);
    EXPECT_EQ(a[i].success, b[i].success);
  }
}

TEST(CwTest, FoolsAnUntrainedModelReliably) {
  const ModelParams m = TinyConv(30);
  const NdArray x = RandomBatch(6, 31);
  // True labels: the model's own predictions, so every sample starts
  // correctly classified and CW has to do real work.
  const std::vector<int> labels = PredictClasses(m, x);
  const auto advs = CwL2(m, x, labels, 40, 0.5);
  int successes = 0;
  for (const auto& a : advs) successes += a.success ? 1 : 0;
  EXPECT_GE(successes, 5);
}

TEST(AttackDeterminismTest, RepeatRunsAreBitIdentical) {
  const ModelParams m = TinyConv(32);
  const NdArray x = RandomBatch(2, 33);
  const auto labels = RandomLabels(2, 4, 34);
  AttackBudget budget;
  budget.epsilon = 0.05;
  budget.iterations = 6;
  const auto a = Pgd(m, x, labels, budget);
  const auto b = Pgd(m, x, labels, budget);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].adversarial.data, b[i].adversarial.data);
  }
}

}  // namespace
}  // namespace mtlat
