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

#ifndef MTLAT_CORRUPTIONS_H_
#define MTLAT_CORRUPTIONS_H_

#include <array>
#include <cstdint>
#include <string>

#include "mtlat/dataset.h"
#include "mtlat/model.h"
#include "mtlat/nd_array.h"

namespace mtlat {

// 19 corruption kinds: the 15 ImageNet-C families adapted to desk
// resolution, plus occlusion, color distortion, translation and rotation.
enum class CorruptionKind {
  kGaussianNoise = 0,
  kShotNoise,
  kImpulseNoise,
  kDefocusBlur,
  kGlassBlur,
  kMotionBlur,
  kZoomBlur,
  kSnow,
  kFrost,
  kFog,
  kBrightness,
  kContrast,
  kElastic,
  kPixelate,
  kJpeg,
  kOcclusion,
  kColorDistortion,
  kTranslation,
  kRotation,
};

constexpr int kNumCorruptions = 19;

const char* CorruptionName(CorruptionKind kind);
CorruptionKind CorruptionFromName(const std::string& name);

// Every kind is driven by one scalar strength, monotone in effect; severity
// levels 1..5 interpolate linearly between a calibrated (low, high) pair.
struct SeverityTable {
  std::array<std::array<double, 5>, kNumCorruptions> params;

  static SeverityTable Desk32Default();
  static SeverityTable FromBounds(
      const std::array<std::pair<double, double>, kNumCorruptions>& bounds);
  void SetBounds(CorruptionKind kind, double low, double high);
};

// Upper end of the searchable strength range per kind.
double StrengthRangeMax(CorruptionKind kind);

// Applies the corruption with an explicit strength. Stochastic kinds draw
// from Rng(seed); pass a per-image seed.
NdArray ApplyCorruptionParam(CorruptionKind kind, double strength,
                             const NdArray& image, uint64_t seed);

// Severity-level entry point: strength = table[kind][severity-1], internal
// seed derived from (seed, kind, severity) so the output is a pure function
// of (seed, kind, severity, image).
NdArray ApplyCorruption(CorruptionKind kind, int severity,
                        const NdArray& image, uint64_t seed,
                        const SeverityTable& table);

// RGB -> YCbCr -> 8x8 DCT -> quantize at `quality` (1..100, standard table
// scaling) -> reconstruct. No entropy coding; quantization is the lossy step.
NdArray JpegRoundtrip(const NdArray& image, int quality);

struct CalibrationResult {
  double low = 0.0;   // strength causing a 5-point accuracy drop
  double high = 0.0;  // strength causing a 30-point accuracy drop
  double clean_accuracy = 0.0;
  double low_drop = 0.0, high_drop = 0.0;  // achieved drops, percent points
};

// Binary-searches the kind's strength for 5-point and 30-point absolute
// accuracy drops of the reference model on the test split. Throws when the
// range cannot reach a 30-point drop.
CalibrationResult CalibrateSeverity(CorruptionKind kind,
                                    const ModelParams& reference,
                                    const Dataset::Split& test, uint64_t seed);

}  // namespace mtlat

#endif  // MTLAT_CORRUPTIONS_H_
