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

#ifndef MTLAT_MODEL_H_
#define MTLAT_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtlat/nd_array.h"
#include "mtlat/tape.h"

namespace mtlat {

enum class Arch { kSmallConv, kSmallMlp };

const char* ArchName(Arch arch);
Arch ArchFromName(const std::string& name);

// A classifier: architecture tag, input geometry, and the ordered parameter
// arrays. Parameter order is fixed per architecture and is the checkpoint
// serialization order.
struct ModelParams {
  Arch arch = Arch::kSmallConv;
  size_t height = 0, width = 0, channels = 0, classes = 0;
  uint64_t init_seed = 0;
  std::vector<NdArray> params;
};

// Parameter names in serialization order for the given architecture.
std::vector<std::string> ParamNames(Arch arch);

// He-uniform initialization (limit sqrt(6 / fan_in)), biases zero, seeded.
ModelParams InitModel(Arch arch, size_t height, size_t width, size_t channels,
                      size_t classes, uint64_t seed);

// Builds the forward graph on `tape` from an already-recorded input leaf.
// Appends the parameter leaf ids to `param_ids` when non-null.
ValueId ForwardLogits(Tape& tape, const ModelParams& model, ValueId input,
                      std::vector<ValueId>* param_ids = nullptr);

// Logits for a batch [b, h, w, c] -> [b, n]. Batch of one equals the
// corresponding row of a larger batch.
NdArray PredictLogits(const ModelParams& model, const NdArray& batch);

// Argmax class per sample (lowest index wins ties).
std::vector<int> PredictClasses(const ModelParams& model,
                                const NdArray& batch);

// Mean softmax cross entropy of the batch against soft labels [b, n], plus
// the gradient for every parameter array. Labels must each sum to 1 within
// 1e-9 and be non-negative.
double LossAndGrad(const ModelParams& model, const NdArray& batch,
                   const NdArray& labels, std::vector<NdArray>* grads);

// Checks every row sums to 1 within 1e-9 with non-negative entries.
void ValidateLabels(const NdArray& labels);

// Stacks per-image tensors [h, w, c] into one batch [b, h, w, c].
NdArray StackBatch(const std::vector<NdArray>& images,
                   const std::vector<size_t>& indices);

// Fraction of images whose argmax prediction equals the integer label,
// evaluated in fixed-size chunks. Returns correct count.
size_t CountCorrect(const ModelParams& model,
                    const std::vector<NdArray>& images,
                    const std::vector<int>& labels);

NdArray OneHot(size_t cls, size_t n);

}  // namespace mtlat

#endif  // MTLAT_MODEL_H_
