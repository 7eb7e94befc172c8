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

#include "mtlat/optimizer.h"

#include <cmath>

#include "mtlat/errors.h"

namespace mtlat {

OptimState OptimState::For(const ModelParams& model, AdamConfig cfg) {
  OptimState s;
  s.cfg = cfg;
  for (const NdArray& p : model.params) {
    s.m.push_back(NdArray::Zeros(p.shape));
    s.v.push_back(NdArray::Zeros(p.shape));
  }
  return s;
}

double OptimState::LrForEpoch(int epoch) const {
  double lr = cfg.lr;
  for (int d : cfg.decay_epochs) {
    if (epoch >= d) lr /= 10.0;
  }
  return lr;
}

void AdamStep(ModelParams& model, const std::vector<NdArray>& grads,
              OptimState& state, double lr) {
  if (grads.size() != model.params.size()) {
    throw ShapeError("adam_step: got " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(model.params.size()) +
                     " parameter arrays");
  }
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double decay = 1.0 - lr * state.cfg.weight_decay;

  for (size_t i = 0; i < model.params.size(); ++i) {
    NdArray& p = model.params[i];
    const NdArray& g = grads[i];
    if (!SameShape(p, g)) {
      throw ShapeError("adam_step: gradient shape " + ShapeToString(g.shape) +
                       " does not match parameter " + ShapeToString(p.shape));
    }
    NdArray& m = state.m[i];
    NdArray& v = state.v[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] = decay * p[j] - lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

}  // namespace mtlat
