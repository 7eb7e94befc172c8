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

#ifndef MTLAT_ATTACKS_H_
#define MTLAT_ATTACKS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtlat/model.h"
#include "mtlat/nd_array.h"

namespace mtlat {

struct AttackBudget {
  enum class Norm { kLinf, kL2 };
  Norm norm = Norm::kLinf;
  double epsilon = 0.04;
  int iterations = 10;
  // 0 selects the default 2.5 * epsilon / iterations; explicit values must
  // be positive for iterative attacks.
  double step_size = 0.0;
  double confidence = 5.0;  // CW kappa, logit units
  double mi_decay = 1.0;    // MI-FGSM momentum mu
  bool random_start = false;
  uint64_t seed = 0;  // consumed only when random_start is set
};

struct AdversarialExample {
  NdArray adversarial;
  NdArray original;
  std::string attack;
  double epsilon = 0.0;
  bool success = false;  // on the attacked model: pred != truth, or == target
  int predicted = -1;

  double MaxAbsDelta() const;
  double L2Delta() const;
};

// d(mean cross entropy)/d(batch) for soft labels [b, n].
NdArray InputGradient(const ModelParams& model, const NdArray& batch,
                      const NdArray& labels);

// All L-inf attacks maintain the perturbation in delta space: delta is
// clamped to [-eps, eps] after every step and the image is materialized as
// clip01(x + delta), so the budget holds exactly and a single PGD step with
// step_size = eps reproduces FGSM bit for bit.

// x_adv = clip01(x - eps * sign(grad_x L(x, y_target)))   (descends toward
// the target class). Targets are rows of a [b, n] label matrix.
std::vector<AdversarialExample> FgsmTargeted(const ModelParams& model,
                                             const NdArray& batch,
                                             const NdArray& targets,
                                             double epsilon);

// x_adv = clip01(x + eps * sign(grad_x L(x, y_true)))
std::vector<AdversarialExample> FgsmUntargeted(const ModelParams& model,
                                               const NdArray& batch,
                                               const std::vector<int>& labels,
                                               double epsilon);

// Iterated signed ascent on the true-label loss, L-inf projected.
std::vector<AdversarialExample> Pgd(const ModelParams& model,
                                    const NdArray& batch,
                                    const std::vector<int>& labels,
                                    const AttackBudget& budget);

// PGD descending toward the least-likely class of the clean prediction
// (ties break to the lowest class index).
std::vector<AdversarialExample> PgdLeastLikely(const ModelParams& model,
                                               const NdArray& batch,
                                               const std::vector<int>& labels,
                                               const AttackBudget& budget);

// Momentum iterative FGSM (decay mu = 1, per-sample L1-normalized gradient
// accumulation, step eps/iterations). Crafted on `surrogate`; the caller
// owns the black-box contract.
std::vector<AdversarialExample> MiFgsm(const ModelParams& surrogate,
                                       const NdArray& batch,
                                       const std::vector<int>& labels,
                                       const AttackBudget& budget);

// Carlini-Wagner L2: tanh-space Adam minimizing
//   ||delta||_2^2 + c * max(Z_true - max_other Z + kappa, 0),
// c swept geometrically {1, 10, 100, 1000, 10000} with `iterations` inner
// steps each; returns the smallest-L2 success per sample, or the lowest
// hinge iterate with success = false.
std::vector<AdversarialExample> CwL2(const ModelParams& model,
                                     const NdArray& batch,
                                     const std::vector<int>& labels,
                                     int iterations, double confidence);

// Single-image conveniences.
AdversarialExample FgsmTargetedOne(const ModelParams& model,
                                   const NdArray& image,
                                   const NdArray& target_label,
                                   double epsilon);
AdversarialExample FgsmUntargetedOne(const ModelParams& model,
                                     const NdArray& image, int label,
                                     double epsilon);

// Least-likely class of the model's clean prediction.
int LeastLikelyClass(const ModelParams& model, const NdArray& image);

}  // namespace mtlat

#endif  // MTLAT_ATTACKS_H_
