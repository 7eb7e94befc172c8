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

#include "mtlat/corruptions.h"

#include <cmath>

#include "gtest/gtest.h"
#include "mtlat/dataset.h"
#include "mtlat/errors.h"
#include "mtlat/rng.h"

namespace mtlat {
namespace {

NdArray ConstantImage(double v, size_t side = 32) {
  return NdArray::Full({side, side, 3}, v);
}

NdArray RandomImage(uint64_t seed, size_t side = 32) {
  Rng rng(seed);
  NdArray img({side, side, 3});
  for (double& v : img.data) v = rng.Uniform(0.0, 1.0);
  return img;
}

double Psnr(const NdArray& a, const NdArray& b) {
  double mse = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return 1e9;
  return -10.0 * std::log10(mse);
}

TEST(CorruptionTest, BrightnessIsAdditiveAndClipped) {
  const NdArray img = ConstantImage(0.5);
  const NdArray out =
      ApplyCorruptionParam(CorruptionKind::kBrightness, 0.3, img, 1);
  for (double v : out.data) EXPECT_DOUBLE_EQ(0.8, v);
  const NdArray hot =
      ApplyCorruptionParam(CorruptionKind::kBrightness, 0.7, img, 1);
  for (double v : hot.data) EXPECT_DOUBLE_EQ(1.0, v);
}

TEST(CorruptionTest, ZeroStrengthRotationIsIdentity) {
  const NdArray img = RandomImage(2);
  const NdArray out =
      ApplyCorruptionParam(CorruptionKind::kRotation, 0.0, img, 3);
  EXPECT_EQ(img.data, out.data);
  EXPECT_GT(Psnr(img, out), 40.0);
}

TEST(CorruptionTest, GaussianNoiseStdMatchesTable) {
  // Severities where [0,1] clipping is negligible for a mid-grey image.
  const SeverityTable table = SeverityTable::Desk32Default();
  const NdArray img = ConstantImage(0.5, 64);  // 12288 pixels
  for (int severity = 1; severity <= 2; ++severity) {
    const NdArray out =
        ApplyCorruption(CorruptionKind::kGaussianNoise, severity, img, 7,
                        table);
    double var = 0.0, mean = 0.0;
    for (size_t i = 0; i < out.size(); ++i) mean += out[i] - img[i];
    mean /= static_cast<double>(out.size());
    for (size_t i = 0; i < out.size(); ++i) {
      const double d = out[i] - img[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(out.size());
    const double sigma =
        table.params[static_cast<int>(CorruptionKind::kGaussianNoise)]
                    [severity - 1];
    EXPECT_NEAR(sigma, std::sqrt(var), 0.05 * sigma) << "severity " << severity;
  }
}

TEST(CorruptionTest, ShotNoiseVarianceScalesWithStrength) {
  // Strengths where the [0,1] clip rarely binds for a mid-grey image.
  const NdArray img = ConstantImage(0.5, 64);
  double prev = 0.0;
  for (double t : {0.02, 0.05, 0.1}) {
    const NdArray out =
        ApplyCorruptionParam(CorruptionKind::kShotNoise, t, img, 11);
    double var = 0.0;
    for (size_t i = 0; i < out.size(); ++i) {
      const double d = out[i] - img[i];
      var += d * d;
    }
    var /= static_cast<double>(out.size());
    EXPECT_GT(var, prev);
    prev = var;
    // Poisson(x/t)/ (1/t): variance = x*t; x = 0.5.
    EXPECT_NEAR(0.5 * t, var, 0.15 * 0.5 * t);
  }
}

TEST(CorruptionTest, OcclusionPaintsExactMidGreySquare) {
  const SeverityTable table = SeverityTable::Desk32Default();
  const NdArray img = ConstantImage(0.9);
  const NdArray out =
      ApplyCorruption(CorruptionKind::kOcclusion, 1, img, 13, table);
  size_t grey = 0;
  for (size_t i = 0; i < out.size(); ++i) {
    if (out[i] != img[i]) {
      EXPECT_DOUBLE_EQ(0.5, out[i]);
      ++grey;
    }
  }
  // Severity 1 at desk scale is a 9x9 square across 3 channels.
  EXPECT_EQ(9u * 9u * 3u, grey);
}

TEST(CorruptionTest, RotationZeroFillsOutOfFrame) {
  const NdArray img = ConstantImage(1.0);
  const NdArray out =
      ApplyCorruptionParam(CorruptionKind::kRotation, 40.0, img, 17);
  // A 40-degree rotation of a full-bright image leaves exact zeros in the
  // corners that map outside the source frame.
  size_t zeros = 0;
  for (double v : out.data) {
    if (v == 0.0) ++zeros;
  }
  EXPECT_GT(zeros, 100u);
}

TEST(CorruptionTest, TranslationZeroFillsVacatedEdge) {
  const NdArray img = ConstantImage(1.0);
  const NdArray out =
      ApplyCorruptionParam(CorruptionKind::kTranslation, 9.0, img, 19);
  size_t zeros = 0;
  for (double v : out.data) {
    if (v == 0.0) ++zeros;
  }
  // A 9px shift vacates at least ~8 full rows or columns.
  EXPECT_GE(zeros, 8u * 32u * 3u / 2u);
}

TEST(CorruptionTest, AllKindsPreserveRangeAndDeterminism) {
  const SeverityTable table = SeverityTable::Desk32Default();
  const NdArray img = RandomImage(23);
  for (int k = 0; k < kNumCorruptions; ++k) {
    const CorruptionKind kind = static_cast<CorruptionKind>(k);
    for (int severity : {1, 3, 5}) {
      const NdArray a = ApplyCorruption(kind, severity, img, 29, table);
      const NdArray b = ApplyCorruption(kind, severity, img, 29, table);
      EXPECT_EQ(a.data, b.data) << CorruptionName(kind);
      const NdArray c = ApplyCorruption(kind, severity, img, 31, table);
      for (double v : a.data) {
        ASSERT_GE(v, 0.0) << CorruptionName(kind);
        ASSERT_LE(v, 1.0) << CorruptionName(kind);
      }
      (void)c;
    }
  }
}

TEST(CorruptionTest, SeverityOutOfRangeRejected) {
  const SeverityTable table = SeverityTable::Desk32Default();
  const NdArray img = RandomImage(37);
  EXPECT_THROW(
      ApplyCorruption(CorruptionKind::kFog, 0, img, 1, table), ConfigError);
  EXPECT_THROW(
      ApplyCorruption(CorruptionKind::kFog, 6, img, 1, table), ConfigError);
}

TEST(CorruptionTest, SeverityTableMonotone) {
  const SeverityTable table = SeverityTable::Desk32Default();
  for (int k = 0; k < kNumCorruptions; ++k) {
    for (int s = 1; s < 5; ++s) {
      EXPECT_LE(table.params[k][s - 1], table.params[k][s])
          << CorruptionName(static_cast<CorruptionKind>(k));
    }
  }
}

TEST(JpegTest, HighQualityIsNearLossless) {
  const NdArray img = RandomImage(41);
  EXPECT_GT(Psnr(img, JpegRoundtrip(img, 100)), 45.0);
}

TEST(JpegTest, QualityMonotonicityOnNaturalFixtures) {
  const Dataset ds = SynthDataset(43, 4, 3);
  for (const NdArray& img : ds.train.images) {
    const double high = Psnr(img, JpegRoundtrip(img, 90));
    const double low = Psnr(img, JpegRoundtrip(img, 10));
    EXPECT_GE(high, low);
  }
}

TEST(JpegTest, ConstantImageStaysConstant) {
  // Every block carries only a DC coefficient, so reconstruction is flat at
  // any quality and off by at most the DC quantization step.
  for (double v : {0.13, 0.5, 0.87}) {
    const NdArray img = ConstantImage(v);
    for (int q : {10, 50, 100}) {
      const NdArray out = JpegRoundtrip(img, q);
      for (size_t p = 1; p < out.size() / 3; ++p) {
        for (size_t c = 0; c < 3; ++c) {
          ASSERT_DOUBLE_EQ(out[c], out[p * 3 + c]);
        }
      }
      double max_err = 0.0;
      for (size_t i = 0; i < out.size(); ++i) {
        max_err = std::max(max_err, std::abs(out[i] - img[i]));
      }
      EXPECT_LT(max_err, 0.06) << "q=" << q << " v=" << v;
    }
  }
}

TEST(CalibrationTest, DegenerateModelCannotReachDrop) {
  // All-zero weights predict one class regardless of input: no corruption
  // can move accuracy, so the 30-point target is unreachable.
  const Dataset ds = SynthDataset(47, 4, 8);
  ModelParams blind = InitModel(Arch::kSmallConv, 32, 32, 3, 4, 1);
  for (NdArray& p : blind.params) {
    for (double& v : p.data) v = 0.0;
  }
  EXPECT_THROW(CalibrateSeverity(CorruptionKind::kGaussianNoise, blind,
                                 ds.test, 1),
               ContractError);
}

}  // namespace
}  // namespace mtlat
