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

#include "mtlat/augment.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>

#include "mtlat/attacks.h"
#include "mtlat/errors.h"

namespace mtlat {

namespace {

inline double Clip01(double v) { return std::clamp(v, 0.0, 1.0); }

inline double Sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void MixRowInto(const double* a, const double* b, double lambda, double* out,
                size_t n) {
  const double l2 = 1.0 - lambda;
  for (size_t i = 0; i < n; ++i) out[i] = lambda * a[i] + l2 * b[i];
}

}  // namespace

const char* TrainModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kStandard: return "standard";
    case TrainMode::kMixup: return "mixup";
    case TrainMode::kTlat: return "tlat";
    case TrainMode::kMTlat: return "m-tlat";
    case TrainMode::kIat: return "iat";
    case TrainMode::kFgsmAt: return "fgsm-at";
    case TrainMode::kTargetFgsmAt: return "target-fgsm-at";
    case TrainMode::kLsAt: return "ls-at";
  }
  return "?";
}

TrainMode TrainModeFromName(const std::string& name) {
  for (TrainMode m :
       {TrainMode::kStandard, TrainMode::kMixup, TrainMode::kTlat,
        TrainMode::kMTlat, TrainMode::kIat, TrainMode::kFgsmAt,
        TrainMode::kTargetFgsmAt, TrainMode::kLsAt}) {
    if (name == TrainModeName(m)) return m;
  }
  throw ConfigError("unknown training mode: " + name);
}

std::pair<NdArray, NdArray> MixupPair(const NdArray& x_i, const NdArray& y_i,
                                      const NdArray& x_j, const NdArray& y_j,
                                      double lambda) {
  if (!SameShape(x_i, x_j) || !SameShape(y_i, y_j)) {
    throw ShapeError("mixup_pair: mismatched shapes " +
                     ShapeToString(x_i.shape) + " vs " +
                     ShapeToString(x_j.shape));
  }
  NdArray x(x_i.shape), y(y_i.shape);
  MixRowInto(x_i.data.data(), x_j.data.data(), lambda, x.data.data(),
             x.size());
  MixRowInto(y_i.data.data(), y_j.data.data(), lambda, y.data.data(),
             y.size());
  return {std::move(x), std::move(y)};
}

NdArray TlatLabel(const NdArray& y_clean, const NdArray& y_target,
                  double eps) {
  if (!SameShape(y_clean, y_target)) {
    throw ShapeError("tlat label: mismatched shapes " +
                     ShapeToString(y_clean.shape) + " vs " +
                     ShapeToString(y_target.shape));
  }
  NdArray y(y_clean.shape);
  for (size_t i = 0; i < y.size(); ++i) {
    y[i] = (1.0 - eps) * y_clean[i] + eps * y_target[i];
  }
  return y;
}

double LsLabelValue(bool is_true_class, double eps, size_t n_classes) {
  // (1-eps) * one_hot + eps * uniform; the true class gets the leftover
  // eps/N so the distribution sums to exactly 1.
  const double lo = eps / static_cast<double>(n_classes);
  return is_true_class ? 1.0 - eps + lo : lo;
}

std::pair<NdArray, NdArray> TlatCraft(const ModelParams& model,
                                      const NdArray& x_clean,
                                      const NdArray& y_clean,
                                      const NdArray& y_target, double eps) {
  NdArray batch({1, x_clean.dim(0), x_clean.dim(1), x_clean.dim(2)},
                x_clean.data);
  NdArray targets({1, y_target.size()}, y_target.data);
  const NdArray grad = InputGradient(model, batch, targets);
  NdArray x_adv(x_clean.shape);
  for (size_t i = 0; i < x_adv.size(); ++i) {
    x_adv[i] = Clip01(x_clean[i] - eps * Sign(grad[i]));
  }
  return {std::move(x_adv), TlatLabel(y_clean, y_target, eps)};
}

namespace {

// Sums gradients elementwise into acc.
void AccumulateGrads(std::vector<NdArray>& acc,
                     const std::vector<NdArray>& add) {
  if (acc.empty()) {
    acc = add;
    return;
  }
  for (size_t i = 0; i < acc.size(); ++i) {
    for (size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += add[i][j];
  }
}

StepStats StandardStep(ModelParams& model, OptimState& optim,
                       const NdArray& images, const std::vector<int>& labels,
                       double lr) {
  const size_t b = images.dim(0), n = model.classes;
  NdArray y({b, n});
  for (size_t i = 0; i < b; ++i) {
    y[i * n + static_cast<size_t>(labels[i])] = 1.0;
  }
  std::vector<NdArray> grads;
  StepStats st;
  st.loss1 = LossAndGrad(model, images, y, &grads);
  AdamStep(model, grads, optim, lr);
  return st;
}

// Builds the clean-Mixup half shared by the mixup / m-tlat / iat modes.
// Quadruple q mixes samples (4q, 4q+1); trailing samples pair up (a sample
// left alone mixes with itself).
struct MixupPlan {
  std::vector<std::array<size_t, 2>> clean_pairs;  // indices into the batch
  std::vector<std::array<size_t, 2>> adv_pairs;    // second Mixup pair
};

MixupPlan PlanQuadruples(size_t batch, bool with_adv) {
  MixupPlan plan;
  const size_t quads = with_adv ? batch / 4 : 0;
  for (size_t q = 0; q < quads; ++q) {
    plan.clean_pairs.push_back({4 * q, 4 * q + 1});
    plan.adv_pairs.push_back({4 * q + 2, 4 * q + 3});
  }
  size_t rest = quads * 4;
  while (rest < batch) {
    const size_t a = rest;
    const size_t b = rest + 1 < batch ? rest + 1 : rest;
    plan.clean_pairs.push_back({a, b});
    rest += 2;
  }
  return plan;
}

NdArray BatchOf(const NdArray& like, size_t rows) {
  return NdArray({rows, like.dim(1), like.dim(2), like.dim(3)});
}

// Mixup / M-TLAT / IAT share the clean-Mixup couples and differ in how the
// adversarial couple is built.
StepStats CoupleStep(ModelParams& model, OptimState& optim,
                     const NdArray& images, const std::vector<int>& labels,
                     const TrainRecipe& recipe, Rng& rng, double lr) {
  const size_t batch = images.dim(0);
  const size_t n = model.classes;
  const size_t per = images.size() / batch;
  const bool with_adv =
      recipe.mode == TrainMode::kMTlat || recipe.mode == TrainMode::kIat;
  const MixupPlan plan = PlanQuadruples(batch, with_adv);
  const double alpha = recipe.mixup.alpha;

  NdArray clean_x = BatchOf(images, plan.clean_pairs.size());
  NdArray clean_y({plan.clean_pairs.size(), n});
  NdArray adv_x = BatchOf(images, plan.adv_pairs.size());
  NdArray adv_y({plan.adv_pairs.size(), n});

  // Per-quadruple draws in a fixed order: lambda1, lambda2, eps, target.
  std::vector<double> lambda2(plan.adv_pairs.size());
  std::vector<double> eps(plan.adv_pairs.size());
  std::vector<size_t> target(plan.adv_pairs.size());
  for (size_t q = 0; q < plan.adv_pairs.size(); ++q) {
    const double l1 = rng.Beta(alpha, alpha);
    lambda2[q] = rng.Beta(alpha, alpha);
    eps[q] = rng.Uniform(0.0, recipe.tlat.eps_max);
    target[q] = rng.UniformInt(n);
    const auto [a, b] = plan.clean_pairs[q];
    MixRowInto(images.data.data() + a * per, images.data.data() + b * per, l1,
               clean_x.data.data() + q * per, per);
    clean_y[q * n + static_cast<size_t>(labels[a])] += l1;
    clean_y[q * n + static_cast<size_t>(labels[b])] += 1.0 - l1;
  }
  // Trailing clean pairs (also the whole batch in plain Mixup mode).
  for (size_t p = plan.adv_pairs.size(); p < plan.clean_pairs.size(); ++p) {
    const double l = rng.Beta(alpha, alpha);
    const auto [a, b] = plan.clean_pairs[p];
    MixRowInto(images.data.data() + a * per, images.data.data() + b * per, l,
               clean_x.data.data() + p * per, per);
    clean_y[p * n + static_cast<size_t>(labels[a])] += l;
    clean_y[p * n + static_cast<size_t>(labels[b])] += 1.0 - l;
  }

  StepStats st;
  if (recipe.mode == TrainMode::kMTlat && !plan.adv_pairs.empty()) {
    // Second Mixup pair, then one targeted-FGSM craft per quadruple.
    NdArray mix2 = BatchOf(images, plan.adv_pairs.size());
    NdArray mix2_y({plan.adv_pairs.size(), n});
    NdArray target_rows({plan.adv_pairs.size(), n});
    for (size_t q = 0; q < plan.adv_pairs.size(); ++q) {
      const auto [a, b] = plan.adv_pairs[q];
      MixRowInto(images.data.data() + a * per, images.data.data() + b * per,
                 lambda2[q], mix2.data.data() + q * per, per);
      mix2_y[q * n + static_cast<size_t>(labels[a])] += lambda2[q];
      mix2_y[q * n + static_cast<size_t>(labels[b])] += 1.0 - lambda2[q];
      target_rows[q * n + target[q]] = 1.0;
    }
    const NdArray grad = InputGradient(model, mix2, target_rows);
    st.input_gradients = static_cast<int>(plan.adv_pairs.size());
    for (size_t q = 0; q < plan.adv_pairs.size(); ++q) {
      for (size_t j = 0; j < per; ++j) {
        adv_x[q * per + j] = Clip01(mix2[q * per + j] -
                                    eps[q] * Sign(grad[q * per + j]));
      }
      for (size_t j = 0; j < n; ++j) {
        adv_y[q * n + j] = (1.0 - eps[q]) * mix2_y[q * n + j] +
                           (j == target[q] ? eps[q] : 0.0);
      }
    }
  } else if (recipe.mode == TrainMode::kIat && !plan.adv_pairs.empty()) {
    // Attack both samples first (two crafts per quadruple), then Mixup with
    // plain interpolated labels.
    NdArray raw = BatchOf(images, 2 * plan.adv_pairs.size());
    NdArray raw_y({2 * plan.adv_pairs.size(), n});
    for (size_t q = 0; q < plan.adv_pairs.size(); ++q) {
      const auto [a, b] = plan.adv_pairs[q];
      std::memcpy(raw.data.data() + (2 * q) * per,
                  images.data.data() + a * per, per * sizeof(double));
      std::memcpy(raw.data.data() + (2 * q + 1) * per,
                  images.data.data() + b * per, per * sizeof(double));
      raw_y[(2 * q) * n + static_cast<size_t>(labels[a])] = 1.0;
      raw_y[(2 * q + 1) * n + static_cast<size_t>(labels[b])] = 1.0;
    }
    const NdArray grad = InputGradient(model, raw, raw_y);
    st.input_gradients = static_cast<int>(2 * plan.adv_pairs.size());
    for (size_t q = 0; q < plan.adv_pairs.size(); ++q) {
      const auto [a, b] = plan.adv_pairs[q];
      for (size_t j = 0; j < per; ++j) {
        const double adv_a = Clip01(raw[(2 * q) * per + j] +
                                    eps[q] * Sign(grad[(2 * q) * per + j]));
        const double adv_b =
            Clip01(raw[(2 * q + 1) * per + j] +
                   eps[q] * Sign(grad[(2 * q + 1) * per + j]));
        adv_x[q * per + j] = lambda2[q] * adv_a + (1.0 - lambda2[q]) * adv_b;
      }
      adv_y[q * n + static_cast<size_t>(labels[a])] += lambda2[q];
      adv_y[q * n + static_cast<size_t>(labels[b])] += 1.0 - lambda2[q];
    }
  }

  std::vector<NdArray> grads;
  st.loss1 = LossAndGrad(model, clean_x, clean_y, &grads);
  if (!plan.adv_pairs.empty() && with_adv) {
    std::vector<NdArray> grads2;
    st.loss2 = LossAndGrad(model, adv_x, adv_y, &grads2);
    AccumulateGrads(grads, grads2);
  }
  AdamStep(model, grads, optim, lr);
  return st;
}

// fgsm-at / target-fgsm-at / ls-at / tlat: first half of the batch stays
// clean with one-hot labels, second half is attacked with mode-specific
// labels; one mean cross entropy over the concatenated minibatch.
StepStats AdvVariantStep(ModelParams& model, OptimState& optim,
                         const NdArray& images, const std::vector<int>& labels,
                         const TrainRecipe& recipe, Rng& rng, double lr) {
  const size_t batch = images.dim(0);
  const size_t n = model.classes;
  const size_t per = images.size() / batch;
  const size_t adv_start = batch / 2;
  const size_t adv_count = batch - adv_start;
  const bool targeted = recipe.mode != TrainMode::kFgsmAt;

  std::vector<double> eps(adv_count);
  std::vector<size_t> target(adv_count, 0);
  NdArray craft_rows({adv_count, n});
  NdArray adv_in = BatchOf(images, adv_count);
  for (size_t i = 0; i < adv_count; ++i) {
    eps[i] = rng.Uniform(0.0, recipe.tlat.eps_max);
    if (targeted) target[i] = rng.UniformInt(n);
    const size_t src = adv_start + i;
    std::memcpy(adv_in.data.data() + i * per, images.data.data() + src * per,
                per * sizeof(double));
    const size_t craft_class = targeted
                                   ? target[i]
                                   : static_cast<size_t>(labels[src]);
    craft_rows[i * n + craft_class] = 1.0;
  }
  const NdArray grad = InputGradient(model, adv_in, craft_rows);

  NdArray x({batch, images.dim(1), images.dim(2), images.dim(3)});
  NdArray y({batch, n});
  std::memcpy(x.data.data(), images.data.data(),
              adv_start * per * sizeof(double));
  for (size_t i = 0; i < adv_start; ++i) {
    y[i * n + static_cast<size_t>(labels[i])] = 1.0;
  }
  for (size_t i = 0; i < adv_count; ++i) {
    const size_t row = adv_start + i;
    const double direction = targeted ? -1.0 : 1.0;
    for (size_t j = 0; j < per; ++j) {
      x[row * per + j] = Clip01(adv_in[i * per + j] +
                                direction * eps[i] * Sign(grad[i * per + j]));
    }
    const size_t true_class = static_cast<size_t>(labels[row]);
    switch (recipe.mode) {
      case TrainMode::kFgsmAt:
      case TrainMode::kTargetFgsmAt:
        y[row * n + true_class] = 1.0;
        break;
      case TrainMode::kLsAt:
        for (size_t j = 0; j < n; ++j) {
          y[row * n + j] = LsLabelValue(j == true_class, eps[i], n);
        }
        break;
      case TrainMode::kTlat:
        for (size_t j = 0; j < n; ++j) {
          y[row * n + j] = (j == true_class ? 1.0 - eps[i] : 0.0) +
                           (j == target[i] ? eps[i] : 0.0);
        }
        break;
      default:
        throw ContractError("AdvVariantStep: unexpected mode");
    }
  }

  std::vector<NdArray> grads;
  StepStats st;
  st.input_gradients = static_cast<int>(adv_count);
  st.loss1 = LossAndGrad(model, x, y, &grads);
  AdamStep(model, grads, optim, lr);
  return st;
}

}  // namespace

StepStats TrainingStep(ModelParams& model, OptimState& optim,
                       const NdArray& batch_images,
                       const std::vector<int>& batch_labels,
                       const TrainRecipe& recipe, Rng& rng, double lr) {
  if (batch_images.dim(0) != batch_labels.size()) {
    throw ShapeError("training step: " + std::to_string(batch_images.dim(0)) +
                     " images vs " + std::to_string(batch_labels.size()) +
                     " labels");
  }
  switch (recipe.mode) {
    case TrainMode::kStandard:
      return StandardStep(model, optim, batch_images, batch_labels, lr);
    case TrainMode::kMixup:
    case TrainMode::kMTlat:
    case TrainMode::kIat:
      return CoupleStep(model, optim, batch_images, batch_labels, recipe, rng,
                        lr);
    case TrainMode::kTlat:
    case TrainMode::kFgsmAt:
    case TrainMode::kTargetFgsmAt:
    case TrainMode::kLsAt:
      return AdvVariantStep(model, optim, batch_images, batch_labels, recipe,
                            rng, lr);
  }
  throw ConfigError("unknown training mode");
}

ModelParams TrainModel(Arch arch, const Dataset& dataset,
                       const TrainRecipe& recipe,
                       std::vector<EpochRecord>* log, std::ostream* jsonl) {
  if (dataset.train.size() == 0) throw DataError("empty training split");
  const NdArray& first = dataset.train.images[0];
  ModelParams model =
      InitModel(arch, first.dim(0), first.dim(1), first.dim(2),
                dataset.classes, DeriveSeed(recipe.seed, "model-init"));
  OptimState optim = OptimState::For(model, recipe.adam);

  for (int epoch = 0; epoch < recipe.epochs; ++epoch) {
    const double lr = optim.LrForEpoch(epoch);
    const auto batches = MakeBatches(dataset.train.size(), recipe.batch_size,
                                     recipe.seed, epoch);
    Rng rng(DeriveSeed(recipe.seed, "train/epoch/" + std::to_string(epoch)));
    double loss1 = 0.0, loss2 = 0.0;
    for (const auto& idx : batches) {
      const NdArray x = StackBatch(dataset.train.images, idx);
      std::vector<int> yb(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) {
        yb[i] = dataset.train.labels[idx[i]];
      }
      const StepStats st = TrainingStep(model, optim, x, yb, recipe, rng, lr);
      loss1 += st.loss1;
      loss2 += st.loss2;
    }
    loss1 /= static_cast<double>(batches.size());
    loss2 /= static_cast<double>(batches.size());

    const double acc =
        100.0 *
        CountCorrect(model, dataset.test.images, dataset.test.labels) /
        static_cast<double>(dataset.test.size());
    if (log) log->push_back({epoch, lr, loss1, loss2, acc});
    if (jsonl) {
      *jsonl << "{\"epoch\":" << epoch << ",\"lr\":" << lr
             << ",\"loss1\":" << loss1 << ",\"loss2\":" << loss2
             << ",\"clean_test_accuracy\":" << acc << "}\n";
    }
  }
  return model;
}

}  // namespace mtlat
