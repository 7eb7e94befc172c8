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

#ifndef MTLAT_OPTIMIZER_H_
#define MTLAT_OPTIMIZER_H_

#include <cstdint>
#include <vector>

#include "mtlat/model.h"
#include "mtlat/nd_array.h"

namespace mtlat {

struct AdamConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  // Learning rate divides by 10 at the start of each listed epoch
  // (0-indexed), i.e. "at the end of" the preceding epoch.
  std::vector<int> decay_epochs = {10, 20, 25};
};

struct OptimState {
  AdamConfig cfg;
  std::vector<NdArray> m, v;
  int64_t step = 0;

  static OptimState For(const ModelParams& model, AdamConfig cfg);
  double LrForEpoch(int epoch) const;
};

// One Adam update with decoupled weight decay: the decay shrinks parameters
// by (1 - lr*wd) independently of the moment-based step.
void AdamStep(ModelParams& model, const std::vector<NdArray>& grads,
              OptimState& state, double lr);

}  // namespace mtlat

#endif  // MTLAT_OPTIMIZER_H_
