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

#ifndef MTLAT_TAPE_H_
#define MTLAT_TAPE_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mtlat/nd_array.h"

namespace mtlat {

struct ValueId {
  size_t index = 0;
};

// Reverse-mode tape. Each primitive records its inputs and whatever forward
// state its backward rule needs. Single writer; evaluate independent graphs
// on independent tapes.
class Tape {
 public:
  ValueId Leaf(NdArray value);

  // c[m,n] = a[m,k] * b[k,n]
  ValueId MatMul(ValueId a, ValueId b);

  // x: [batch, h, w, c], w: [kh, kw, c, f], stride 1, zero padding `pad`.
  ValueId Conv2d(ValueId x, ValueId w, size_t pad);

  // Broadcast add of a length-n vector over the last dimension.
  ValueId AddBias(ValueId x, ValueId b);

  ValueId Relu(ValueId x);

  // [batch, h, w, c] -> [batch, h/2, w/2, c], 2x2 windows, stride 2.
  ValueId MaxPool2(ValueId x);

  ValueId Reshape(ValueId x, std::vector<size_t> shape);

  ValueId ScalarMul(ValueId x, double s);

  // Scalar sum of all elements.
  ValueId Sum(ValueId x);

  // Mean over rows of -sum_j labels[r,j] * log softmax(logits[r,:])_j,
  // computed in log-sum-exp form. Labels may be any soft distribution.
  ValueId SoftmaxCrossEntropy(ValueId logits, ValueId labels);

  const NdArray& Value(ValueId id) const;
  size_t NumNodes() const { return nodes_.size(); }

  // Gradients per value id; ids that do not reach the loss read as zeros.
  class Gradients {
   public:
    // Zero-filled array of the value's shape when no gradient flowed.
    NdArray Get(const Tape& tape, ValueId id) const;
    const NdArray* MaybeGet(ValueId id) const;

   private:
    friend class Tape;
    std::vector<std::optional<NdArray>> grads_;
  };

  // Backward from a scalar loss. `wanted` restricts work to the subgraph
  // reaching those values; empty means everything.
  Gradients Backward(ValueId loss, const std::vector<ValueId>& wanted = {}) const;

  // Backward from an arbitrary value with a caller-supplied output gradient
  // (same shape as the value). Used by attacks that differentiate a custom
  // function of the logits.
  Gradients BackwardSeeded(ValueId output, const NdArray& seed,
                           const std::vector<ValueId>& wanted = {}) const;

 private:
  enum class OpKind {
    kLeaf,
    kMatMul,
    kConv2d,
    kAddBias,
    kRelu,
    kMaxPool2,
    kReshape,
    kScalarMul,
    kSum,
    kSoftmaxCrossEntropy,
  };

  struct Node {
    OpKind kind;
    std::vector<size_t> inputs;
    NdArray value;
    NdArray saved;                      // op-specific forward state
    std::vector<unsigned char> argmax;  // max pool winners
    size_t pad = 0;
    double scalar = 0.0;
  };

  ValueId Push(Node node);
  const Node& At(ValueId id) const;

  std::vector<Node> nodes_;
};

// Max over sampled coordinates of
//   |analytic_i - (f(x + h e_i) - f(x - h e_i)) / 2h| / max(1, |analytic_i|).
// `skip` (optional) excludes coordinates, e.g. inputs sitting on a ReLU kink.
// h should be in [1e-7, 1e-3].
double GradCheck(const std::function<double(const NdArray&)>& f,
                 const NdArray& analytic_grad, const NdArray& point, double h,
                 size_t max_coords = 0, uint64_t seed = 0,
                 const std::function<bool(size_t)>& skip = nullptr);

}  // namespace mtlat

#endif  // MTLAT_TAPE_H_
