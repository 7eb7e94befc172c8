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

#include "mtlat/model.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "mtlat/checkpoint.h"
#include "mtlat/errors.h"
#include "mtlat/optimizer.h"
#include "mtlat/rng.h"

namespace mtlat {
namespace {

NdArray RandomBatch(size_t b, size_t h, size_t w, size_t c, uint64_t seed) {
  Rng rng(seed);
  NdArray x({b, h, w, c});
  for (double& v : x.data) v = rng.Uniform(0.0, 1.0);
  return x;
}

TEST(ModelTest, ZeroFinalLayerGivesUniformSoftmax) {
  ModelParams m = InitModel(Arch::kSmallConv, 8, 8, 3, 5, 1);
  // Zero the classifier head: logits collapse to the (zero) bias.
  for (double& v : m.params[6].data) v = 0.0;
  const NdArray logits = PredictLogits(m, RandomBatch(2, 8, 8, 3, 2));
  for (size_t i = 0; i < logits.size(); ++i) {
    EXPECT_DOUBLE_EQ(0.0, logits[i]);
  }
  // softmax of equal logits = 1/N for every class
}

TEST(ModelTest, BatchOfOneMatchesRowOfBatch) {
  ModelParams m = InitModel(Arch::kSmallConv, 8, 8, 3, 4, 3);
  const NdArray batch = RandomBatch(3, 8, 8, 3, 4);
  const NdArray all = PredictLogits(m, batch);
  for (size_t i = 0; i < 3; ++i) {
    NdArray one({1, 8, 8, 3});
    std::copy_n(batch.data.data() + i * 192, 192, one.data.data());
    const NdArray row = PredictLogits(m, one);
    for (size_t j = 0; j < 4; ++j) {
      EXPECT_DOUBLE_EQ(all[i * 4 + j], row[j]);
    }
  }
}

TEST(ModelTest, SelfLabelsGiveZeroGradient) {
  ModelParams m = InitModel(Arch::kSmallMlp, 6, 6, 3, 4, 5);
  const NdArray batch = RandomBatch(3, 6, 6, 3, 6);
  const NdArray logits = PredictLogits(m, batch);
  NdArray labels({3, 4});
  for (size_t r = 0; r < 3; ++r) {
    double mx = logits[r * 4];
    for (size_t j = 1; j < 4; ++j) mx = std::max(mx, logits[r * 4 + j]);
    double denom = 0.0;
    for (size_t j = 0; j < 4; ++j) denom += std::exp(logits[r * 4 + j] - mx);
    for (size_t j = 0; j < 4; ++j) {
      labels[r * 4 + j] = std::exp(logits[r * 4 + j] - mx) / denom;
    }
  }
  std::vector<NdArray> grads;
  LossAndGrad(m, batch, labels, &grads);
  for (const NdArray& g : grads) {
    for (double v : g.data) EXPECT_NEAR(0.0, v, 1e-9);
  }
}

TEST(ModelTest, DuplicatedSampleKeepsMeanGradient) {
  ModelParams m = InitModel(Arch::kSmallMlp, 4, 4, 3, 3, 7);
  const NdArray one = RandomBatch(1, 4, 4, 3, 8);
  NdArray two({2, 4, 4, 3});
  std::copy_n(one.data.data(), 48, two.data.data());
  std::copy_n(one.data.data(), 48, two.data.data() + 48);
  NdArray y1({1, 3});
  y1[1] = 1.0;
  NdArray y2({2, 3});
  y2[1] = 1.0;
  y2[3 + 1] = 1.0;
  std::vector<NdArray> g1, g2;
  const double l1 = LossAndGrad(m, one, y1, &g1);
  const double l2 = LossAndGrad(m, two, y2, &g2);
  EXPECT_NEAR(l1, l2, 1e-12);
  for (size_t i = 0; i < g1.size(); ++i) {
    for (size_t j = 0; j < g1[i].size(); ++j) {
      EXPECT_NEAR(g1[i][j], g2[i][j], 1e-12);
    }
  }
}

TEST(ModelTest, UnnormalizedLabelsRejected) {
  ModelParams m = InitModel(Arch::kSmallMlp, 4, 4, 3, 3, 9);
  const NdArray batch = RandomBatch(1, 4, 4, 3, 10);
  NdArray bad({1, 3});
  bad[0] = 0.7;
  bad[1] = 0.2;  // sums to 0.9
  EXPECT_THROW(LossAndGrad(m, batch, bad, nullptr), DataError);
  NdArray negative({1, 3});
  negative[0] = 1.5;
  negative[1] = -0.5;
  EXPECT_THROW(LossAndGrad(m, batch, negative, nullptr), DataError);
}

TEST(ModelTest, GradMatchesFiniteDifferencesBothArchitectures) {
  for (Arch arch : {Arch::kSmallConv, Arch::kSmallMlp}) {
    ModelParams m = InitModel(arch, 8, 8, 3, 4, 11);
    const NdArray batch = RandomBatch(2, 8, 8, 3, 12);
    NdArray labels({2, 4});
    labels[1] = 1.0;
    labels[4 + 3] = 1.0;

    std::vector<NdArray> grads;
    LossAndGrad(m, batch, labels, &grads);
    for (size_t p = 0; p < m.params.size(); ++p) {
      auto f = [&](const NdArray& v) {
        ModelParams probe = m;
        probe.params[p] = v;
        return LossAndGrad(probe, batch, labels, nullptr);
      };
      EXPECT_LT(GradCheck(f, grads[p], m.params[p], 1e-5, 40, 13 + p), 1e-5)
          << ArchName(arch) << " param " << p;
    }
  }
}

TEST(ModelTest, InitIsSeedDeterministic) {
  const ModelParams a = InitModel(Arch::kSmallConv, 8, 8, 3, 4, 42);
  const ModelParams b = InitModel(Arch::kSmallConv, 8, 8, 3, 4, 42);
  const ModelParams c = InitModel(Arch::kSmallConv, 8, 8, 3, 4, 43);
  for (size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_EQ(a.params[i].data, b.params[i].data);
  }
  EXPECT_NE(a.params[0].data, c.params[0].data);
}

TEST(AdamTest, ZeroGradZeroDecayIsIdentity) {
  ModelParams m = InitModel(Arch::kSmallMlp, 4, 4, 3, 2, 1);
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  OptimState st = OptimState::For(m, cfg);
  std::vector<NdArray> zero;
  for (const NdArray& p : m.params) zero.push_back(NdArray::Zeros(p.shape));
  const std::vector<NdArray> before = m.params;
  AdamStep(m, zero, st, cfg.lr);
  for (size_t i = 0; i < m.params.size(); ++i) {
    EXPECT_EQ(before[i].data, m.params[i].data);
  }
}

TEST(AdamTest, ZeroGradWithDecayShrinks) {
  ModelParams m = InitModel(Arch::kSmallMlp, 4, 4, 3, 2, 2);
  AdamConfig cfg;
  cfg.weight_decay = 1e-4;
  OptimState st = OptimState::For(m, cfg);
  std::vector<NdArray> zero;
  for (const NdArray& p : m.params) zero.push_back(NdArray::Zeros(p.shape));
  const std::vector<NdArray> before = m.params;
  AdamStep(m, zero, st, cfg.lr);
  const double factor = 1.0 - cfg.lr * 1e-4;
  for (size_t i = 0; i < m.params.size(); ++i) {
    for (size_t j = 0; j < m.params[i].size(); ++j) {
      EXPECT_DOUBLE_EQ(before[i][j] * factor, m.params[i][j]);
    }
  }
}

TEST(AdamTest, ConstantGradientStepApproachesLr) {
  // Scalar simulation: with constant gradient the bias-corrected step
  // magnitude converges to lr.
  ModelParams m;
  m.arch = Arch::kSmallMlp;
  m.height = m.width = m.channels = 1;
  m.classes = 2;
  m.params = {NdArray::Scalar(0.0)};
  AdamConfig cfg;
  cfg.lr = 0.002;
  cfg.weight_decay = 0.0;
  OptimState st = OptimState::For(m, cfg);
  const std::vector<NdArray> g = {NdArray::Scalar(0.7)};
  double prev = 0.0;
  double step = 0.0;
  for (int i = 0; i < 5000; ++i) {
    prev = m.params[0][0];
    AdamStep(m, g, st, cfg.lr);
    step = std::abs(m.params[0][0] - prev);
  }
  EXPECT_NEAR(cfg.lr, step, cfg.lr * 1e-3);
}

TEST(AdamTest, LrScheduleDividesByTenAtDecayEpochs) {
  AdamConfig cfg;  // decay at 10, 20, 25
  OptimState st;
  st.cfg = cfg;
  EXPECT_DOUBLE_EQ(0.002, st.LrForEpoch(0));
  EXPECT_DOUBLE_EQ(0.002, st.LrForEpoch(9));
  EXPECT_DOUBLE_EQ(0.0002, st.LrForEpoch(10));
  EXPECT_DOUBLE_EQ(0.0002, st.LrForEpoch(19));
  EXPECT_DOUBLE_EQ(0.00002, st.LrForEpoch(20));
  EXPECT_NEAR(0.000002, st.LrForEpoch(25), 1e-18);
  EXPECT_NEAR(0.000002, st.LrForEpoch(29), 1e-18);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = std::filesystem::temp_directory_path() /
            ("mtlat_ckpt_test_" + std::to_string(::getpid()) + ".mtlat");
  }
  void TearDown() override { std::filesystem::remove(path_); }
  std::filesystem::path path_;
};

TEST_F(CheckpointTest, RoundTripBitExact) {
  const ModelParams m = InitModel(Arch::kSmallConv, 8, 8, 3, 4, 99);
  SaveCheckpoint(m, path_.string());
  const ModelParams r = LoadCheckpoint(path_.string());
  EXPECT_EQ(m.arch, r.arch);
  EXPECT_EQ(m.height, r.height);
  EXPECT_EQ(m.classes, r.classes);
  EXPECT_EQ(m.init_seed, r.init_seed);
  ASSERT_EQ(m.params.size(), r.params.size());
  for (size_t i = 0; i < m.params.size(); ++i) {
    EXPECT_EQ(m.params[i].shape, r.params[i].shape);
    EXPECT_EQ(m.params[i].data, r.params[i].data);  // bit-identical
  }
}

TEST_F(CheckpointTest, CorruptedMagicRejected) {
  const ModelParams m = InitModel(Arch::kSmallMlp, 4, 4, 3, 2, 7);
  SaveCheckpoint(m, path_.string());
  {
    std::fstream f(path_, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("BOGUS!!!", 8);
  }
  EXPECT_THROW(LoadCheckpoint(path_.string()), DataError);
}

TEST_F(CheckpointTest, TruncatedFileRejected) {
  const ModelParams m = InitModel(Arch::kSmallMlp, 4, 4, 3, 2, 7);
  SaveCheckpoint(m, path_.string());
  const auto size = std::filesystem::file_size(path_);
  std::filesystem::resize_file(path_, size - 64);
  EXPECT_THROW(LoadCheckpoint(path_.string()), DataError);
}

TEST_F(CheckpointTest, WrongVersionRejected) {
  const ModelParams m = InitModel(Arch::kSmallMlp, 4, 4, 3, 2, 7);
  SaveCheckpoint(m, path_.string());
  {
    std::fstream f(path_, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    f.put(static_cast<char>(9));
  }
  EXPECT_THROW(LoadCheckpoint(path_.string()), DataError);
}

}  // namespace
}  // namespace mtlat
