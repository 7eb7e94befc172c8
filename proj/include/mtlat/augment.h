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

#ifndef MTLAT_AUGMENT_H_
#define MTLAT_AUGMENT_H_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mtlat/dataset.h"
#include "mtlat/model.h"
#include "mtlat/optimizer.h"
#include "mtlat/rng.h"

namespace mtlat {

struct MixupConfig {
  double alpha = 0.4;  // Beta(alpha, alpha) interpolation weight
};

struct TlatConfig {
  double eps_max = 0.025;  // perturbation drawn from U[0, eps_max]
};

enum class TrainMode {
  kStandard,
  kMixup,
  kTlat,
  kMTlat,
  kIat,
  kFgsmAt,
  kTargetFgsmAt,
  kLsAt,
};

const char* TrainModeName(TrainMode mode);
TrainMode TrainModeFromName(const std::string& name);

struct TrainRecipe {
  TrainMode mode = TrainMode::kStandard;
  MixupConfig mixup;
  TlatConfig tlat;
  int epochs = 30;
  size_t batch_size = 128;
  uint64_t seed = 0;
  AdamConfig adam;
};

// x_mix = lambda*x_i + (1-lambda)*x_j, same for labels.
std::pair<NdArray, NdArray> MixupPair(const NdArray& x_i, const NdArray& y_i,
                                      const NdArray& x_j, const NdArray& y_j,
                                      double lambda);

// y_adv = (1-eps)*y_clean + eps*y_target.
NdArray TlatLabel(const NdArray& y_clean, const NdArray& y_target, double eps);

// Label-smoothing value for the ls-at variant: (1-eps)*one_hot + eps*uniform.
double LsLabelValue(bool is_true_class, double eps, size_t n_classes);

// Targeted-FGSM image with the interpolated TlatLabel.
std::pair<NdArray, NdArray> TlatCraft(const ModelParams& model,
                                      const NdArray& x_clean,
                                      const NdArray& y_clean,
                                      const NdArray& y_target, double eps);

struct StepStats {
  double loss1 = 0.0;  // clean (or whole-batch) loss
  double loss2 = 0.0;  // adversarial loss, when the mode has one
  int input_gradients = 0;  // FGSM crafts performed in this step
};

// One optimizer update on one minibatch, dispatched by recipe.mode.
// Augmented modes tile the batch into quadruples (4 dataset samples per
// couple pair); trailing samples fall back to clean Mixup pairs.
StepStats TrainingStep(ModelParams& model, OptimState& optim,
                       const NdArray& batch_images,
                       const std::vector<int>& batch_labels,
                       const TrainRecipe& recipe, Rng& rng, double lr);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss1 = 0.0;
  double loss2 = 0.0;
  double clean_test_accuracy = 0.0;
};

// Full training run; deterministic for a fixed recipe seed. When `jsonl` is
// non-null one JSON record per epoch is appended to it.
ModelParams TrainModel(Arch arch, const Dataset& dataset,
                       const TrainRecipe& recipe,
                       std::vector<EpochRecord>* log = nullptr,
                       std::ostream* jsonl = nullptr);

}  // namespace mtlat

#endif  // MTLAT_AUGMENT_H_
