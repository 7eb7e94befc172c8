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

#include "mtlat/attacks.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtlat/errors.h"
#include "mtlat/rng.h"

namespace mtlat {

namespace {

inline double Sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline double Clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void CheckEpsilon(double epsilon) {
  if (epsilon < 0.0) {
    throw ContractError("attack epsilon must be >= 0, got " +
                        std::to_string(epsilon));
  }
}

double ResolveStep(const AttackBudget& budget) {
  if (budget.step_size < 0.0 ||
      (budget.step_size == 0.0 && budget.iterations < 1)) {
    throw ContractError("attack step size must be positive");
  }
  if (budget.step_size > 0.0) return budget.step_size;
  return 2.5 * budget.epsilon / budget.iterations;
}

NdArray OneHotRows(const std::vector<int>& labels, size_t n) {
  NdArray y({labels.size(), n});
  for (size_t i = 0; i < labels.size(); ++i) {
    y[i * n + static_cast<size_t>(labels[i])] = 1.0;
  }
  return y;
}

struct BatchDims {
  size_t b, per;
};

BatchDims Dims(const NdArray& batch) {
  return {batch.dim(0), batch.size() / batch.dim(0)};
}

std::vector<AdversarialExample> Finalize(const ModelParams& model,
                                         const NdArray& batch,
                                         const NdArray& adv,
                                         const std::string& name,
                                         double epsilon,
                                         const std::vector<int>& labels,
                                         bool targeted,
                                         const std::vector<int>& targets) {
  const auto [b, per] = Dims(batch);
  const std::vector<int> preds = PredictClasses(model, adv);
  std::vector<AdversarialExample> out(b);
  for (size_t i = 0; i < b; ++i) {
    AdversarialExample& ex = out[i];
    ex.attack = name;
    ex.epsilon = epsilon;
    ex.predicted = preds[i];
    ex.success = targeted ? preds[i] == targets[i] : preds[i] != labels[i];
    ex.original = NdArray({batch.dim(1), batch.dim(2), batch.dim(3)});
    ex.adversarial = ex.original;
    std::copy_n(batch.data.data() + i * per, per, ex.original.data.data());
    std::copy_n(adv.data.data() + i * per, per, ex.adversarial.data.data());
  }
  return out;
}

// One signed step in delta space; direction +1 ascends, -1 descends.
void SignedStep(const NdArray& grad, double step, double epsilon,
                double direction, const NdArray& origin, NdArray& delta,
                NdArray& iterate) {
  for (size_t i = 0; i < delta.size(); ++i) {
    const double d = delta[i] + direction * step * Sign(grad[i]);
    delta[i] = std::clamp(d, -epsilon, epsilon);
    iterate[i] = Clip01(origin[i] + delta[i]);
  }
}

}  // namespace

double AdversarialExample::MaxAbsDelta() const {
  double m = 0.0;
  for (size_t i = 0; i < adversarial.size(); ++i) {
    m = std::max(m, std::abs(adversarial[i] - original[i]));
  }
  return m;
}

double AdversarialExample::L2Delta() const {
  double s = 0.0;
  for (size_t i = 0; i < adversarial.size(); ++i) {
    const double d = adversarial[i] - original[i];
    s += d * d;
  }
  return std::sqrt(s);
}

NdArray InputGradient(const ModelParams& model, const NdArray& batch,
                      const NdArray& labels) {
  Tape tape;
  ValueId x = tape.Leaf(batch);
  ValueId logits = ForwardLogits(tape, model, x);
  ValueId y = tape.Leaf(labels);
  ValueId loss = tape.SoftmaxCrossEntropy(logits, y);
  Tape::Gradients g = tape.Backward(loss, {x});
  return g.Get(tape, x);
}

std::vector<AdversarialExample> FgsmTargeted(const ModelParams& model,
                                             const NdArray& batch,
                                             const NdArray& targets,
                                             double epsilon) {
  CheckEpsilon(epsilon);
  const auto [b, per] = Dims(batch);
  const NdArray grad = InputGradient(model, batch, targets);
  NdArray adv(batch.shape);
  for (size_t i = 0; i < batch.size(); ++i) {
    adv[i] = Clip01(batch[i] - epsilon * Sign(grad[i]));
  }
  std::vector<int> target_ids(b);
  const size_t n = targets.dim(1);
  for (size_t i = 0; i < b; ++i) {
    size_t best = 0;
    for (size_t j = 1; j < n; ++j) {
      if (targets[i * n + j] > targets[i * n + best]) best = j;
    }
    target_ids[i] = static_cast<int>(best);
  }
  return Finalize(model, batch, adv, "fgsm_targeted", epsilon, {}, true,
                  target_ids);
}

std::vector<AdversarialExample> FgsmUntargeted(const ModelParams& model,
                                               const NdArray& batch,
                                               const std::vector<int>& labels,
                                               double epsilon) {
  CheckEpsilon(epsilon);
  const NdArray y = OneHotRows(labels, model.classes);
  const NdArray grad = InputGradient(model, batch, y);
  NdArray adv(batch.shape);
  for (size_t i = 0; i < batch.size(); ++i) {
    adv[i] = Clip01(batch[i] + epsilon * Sign(grad[i]));
  }
  return Finalize(model, batch, adv, "fgsm", epsilon, labels, false, {});
}

namespace {

// Shared L-inf iteration: direction -1 descends toward `target_rows`
// (targeted), +1 ascends on them (untargeted).
NdArray LinfIterate(const ModelParams& model, const NdArray& batch,
                    const NdArray& label_rows, const AttackBudget& budget,
                    double direction) {
  CheckEpsilon(budget.epsilon);
  const double step = ResolveStep(budget);
  NdArray delta(batch.shape);
  NdArray iterate = batch;
  if (budget.random_start) {
    Rng rng(DeriveSeed(budget.seed, "pgd/random_start"));
    for (size_t i = 0; i < delta.size(); ++i) {
      delta[i] = rng.Uniform(-budget.epsilon, budget.epsilon);
      iterate[i] = Clip01(batch[i] + delta[i]);
    }
  }
  for (int it = 0; it < budget.iterations; ++it) {
    const NdArray grad = InputGradient(model, iterate, label_rows);
    SignedStep(grad, step, budget.epsilon, direction, batch, delta, iterate);
  }
  return iterate;
}

}  // namespace

std::vector<AdversarialExample> Pgd(const ModelParams& model,
                                    const NdArray& batch,
                                    const std::vector<int>& labels,
                                    const AttackBudget& budget) {
  const NdArray y = OneHotRows(labels, model.classes);
  const NdArray adv = LinfIterate(model, batch, y, budget, +1.0);
  return Finalize(model, batch, adv, "pgd", budget.epsilon, labels, false, {});
}

std::vector<AdversarialExample> PgdLeastLikely(const ModelParams& model,
                                               const NdArray& batch,
                                               const std::vector<int>& labels,
                                               const AttackBudget& budget) {
  const NdArray logits = PredictLogits(model, batch);
  const size_t b = logits.dim(0), n = logits.dim(1);
  std::vector<int> target_ids(b);
  NdArray targets({b, n});
  for (size_t i = 0; i < b; ++i) {
    size_t worst = 0;
    for (size_t j = 1; j < n; ++j) {
      if (logits[i * n + j] < logits[i * n + worst]) worst = j;
    }
    target_ids[i] = static_cast<int>(worst);
    targets[i * n + worst] = 1.0;
  }
  const NdArray adv = LinfIterate(model, batch, targets, budget, -1.0);
  auto out =
      Finalize(model, batch, adv, "pgd_ll", budget.epsilon, labels, true,
               target_ids);
  return out;
}

std::vector<AdversarialExample> MiFgsm(const ModelParams& surrogate,
                                       const NdArray& batch,
                                       const std::vector<int>& labels,
                                       const AttackBudget& budget) {
  CheckEpsilon(budget.epsilon);
  if (budget.iterations < 1) {
    throw ContractError("mi_fgsm needs at least 1 iteration");
  }
  const double step = budget.epsilon / budget.iterations;
  const auto [b, per] = Dims(batch);
  const NdArray y = OneHotRows(labels, surrogate.classes);

  NdArray delta(batch.shape);
  NdArray iterate = batch;
  NdArray momentum(batch.shape);
  for (int it = 0; it < budget.iterations; ++it) {
    const NdArray grad = InputGradient(surrogate, iterate, y);
    for (size_t i = 0; i < b; ++i) {
      double l1 = 0.0;
      for (size_t j = 0; j < per; ++j) l1 += std::abs(grad[i * per + j]);
      const double inv = l1 > 0.0 ? 1.0 / l1 : 0.0;
      for (size_t j = 0; j < per; ++j) {
        momentum[i * per + j] =
            budget.mi_decay * momentum[i * per + j] + grad[i * per + j] * inv;
      }
    }
    SignedStep(momentum, step, budget.epsilon, +1.0, batch, delta, iterate);
  }
  return Finalize(surrogate, batch, iterate, "mi_fgsm", budget.epsilon, labels,
                  false, {});
}

namespace {

struct CwState {
  NdArray w;          // tanh-space variable
  NdArray adam_m, adam_v;
  int64_t adam_step = 0;
};

// Per-sample hinge f = max(Z_true - max_other + kappa, 0) and best-other
// index (lowest index wins ties).
void CwHinge(const NdArray& logits, const std::vector<int>& labels,
             double kappa, std::vector<double>* f, std::vector<int>* other) {
  const size_t b = logits.dim(0), n = logits.dim(1);
  f->resize(b);
  other->resize(b);
  for (size_t i = 0; i < b; ++i) {
    const size_t t = static_cast<size_t>(labels[i]);
    size_t best = t == 0 ? 1 : 0;
    for (size_t j = 0; j < n; ++j) {
      if (j == t) continue;
      if (logits[i * n + j] > logits[i * n + best]) best = j;
    }
    (*other)[i] = static_cast<int>(best);
    (*f)[i] = std::max(logits[i * n + t] - logits[i * n + best] + kappa, 0.0);
  }
}

}  // namespace

std::vector<AdversarialExample> CwL2(const ModelParams& model,
                                     const NdArray& batch,
                                     const std::vector<int>& labels,
                                     int iterations, double confidence) {
  if (iterations < 1) throw ContractError("cw_l2 needs >= 1 iteration");
  if (confidence < 0.0) throw ContractError("cw_l2 confidence must be >= 0");
  constexpr double kLr = 0.01;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  constexpr double kSqueeze = 1.0 - 1e-6;
  const auto [b, per] = Dims(batch);
  const size_t n = model.classes;

  // delta = 0 is the objective minimum for inputs already misclassified
  // with margin >= kappa; check it before optimizing.
  std::vector<double> best_l2(b, std::numeric_limits<double>::infinity());
  std::vector<char> has_success(b, 0);
  NdArray best_adv = batch;
  std::vector<double> best_f(b, std::numeric_limits<double>::infinity());
  NdArray best_effort = batch;
  {
    const NdArray logits = PredictLogits(model, batch);
    std::vector<double> f;
    std::vector<int> other;
    CwHinge(logits, labels, confidence, &f, &other);
    for (size_t i = 0; i < b; ++i) {
      best_f[i] = f[i];
      if (f[i] == 0.0) {
        has_success[i] = 1;
        best_l2[i] = 0.0;
      }
    }
  }

  NdArray w0(batch.shape);
  for (size_t i = 0; i < batch.size(); ++i) {
    const double t = (2.0 * batch[i] - 1.0) * kSqueeze;
    w0[i] = 0.5 * std::log((1.0 + t) / (1.0 - t));
  }

  for (int stage = 0; stage < 5; ++stage) {
    const double c = std::pow(10.0, stage);
    // Samples with a success keep it; only unsolved ones keep optimizing.
    std::vector<size_t> active;
    for (size_t i = 0; i < b; ++i) {
      if (!has_success[i]) active.push_back(i);
    }
    if (active.empty()) break;

    CwState st;
    st.w = NdArray({active.size(), batch.dim(1), batch.dim(2), batch.dim(3)});
    for (size_t a = 0; a < active.size(); ++a) {
      std::copy_n(w0.data.data() + active[a] * per, per,
                  st.w.data.data() + a * per);
    }
    st.adam_m = NdArray::Zeros(st.w.shape);
    st.adam_v = NdArray::Zeros(st.w.shape);

    for (int it = 0; it < iterations; ++it) {
      NdArray adv(st.w.shape);
      NdArray dadv_dw(st.w.shape);
      for (size_t i = 0; i < st.w.size(); ++i) {
        const double th = std::tanh(st.w[i]);
        adv[i] = 0.5 * (th + 1.0);
        dadv_dw[i] = 0.5 * (1.0 - th * th);
      }

      Tape tape;
      ValueId xid = tape.Leaf(adv);
      ValueId logits_id = ForwardLogits(tape, model, xid);
      const NdArray& logits = tape.Value(logits_id);

      std::vector<int> sub_labels(active.size());
      for (size_t a = 0; a < active.size(); ++a) {
        sub_labels[a] = labels[active[a]];
      }
      std::vector<double> f;
      std::vector<int> other;
      CwHinge(logits, sub_labels, confidence, &f, &other);

      // Track the best L2 success and the lowest-hinge fallback.
      for (size_t a = 0; a < active.size(); ++a) {
        const size_t i = active[a];
        double l2 = 0.0;
        for (size_t j = 0; j < per; ++j) {
          const double d = adv[a * per + j] - batch[i * per + j];
          l2 += d * d;
        }
        if (f[a] == 0.0 && l2 < best_l2[i]) {
          best_l2[i] = l2;
          has_success[i] = 1;
          std::copy_n(adv.data.data() + a * per, per,
                      best_adv.data.data() + i * per);
        }
        if (f[a] < best_f[i]) {
          best_f[i] = f[a];
          std::copy_n(adv.data.data() + a * per, per,
                      best_effort.data.data() + i * per);
        }
      }

      NdArray seed({active.size(), n});
      bool any_hinge = false;
      for (size_t a = 0; a < active.size(); ++a) {
        if (f[a] <= 0.0) continue;
        any_hinge = true;
        seed[a * n + static_cast<size_t>(sub_labels[a])] = c;
        seed[a * n + static_cast<size_t>(other[a])] = -c;
      }

      NdArray dobj(st.w.shape);
      if (any_hinge) {
        Tape::Gradients g = tape.BackwardSeeded(logits_id, seed, {xid});
        const NdArray* dx = g.MaybeGet(xid);
        if (dx) dobj = *dx;
      }
      for (size_t a = 0; a < active.size(); ++a) {
        const size_t i = active[a];
        for (size_t j = 0; j < per; ++j) {
          const double d = adv[a * per + j] - batch[i * per + j];
          dobj[a * per + j] = (dobj[a * per + j] + 2.0 * d) * dadv_dw[a * per + j];
        }
      }

      // Adam on w.
      st.adam_step += 1;
      const double bc1 = 1.0 - std::pow(kBeta1, st.adam_step);
      const double bc2 = 1.0 - std::pow(kBeta2, st.adam_step);
      for (size_t i = 0; i < st.w.size(); ++i) {
        st.adam_m[i] = kBeta1 * st.adam_m[i] + (1.0 - kBeta1) * dobj[i];
        st.adam_v[i] = kBeta2 * st.adam_v[i] + (1.0 - kBeta2) * dobj[i] * dobj[i];
        st.w[i] -= kLr * (st.adam_m[i] / bc1) /
                   (std::sqrt(st.adam_v[i] / bc2) + kAdamEps);
      }
    }
  }

  // Returns the best kappa-margin success per sample, else the lowest-hinge
  // iterate. The success flag reflects the returned image's prediction.
  NdArray adv_out = batch;
  for (size_t i = 0; i < b; ++i) {
    const double* src = has_success[i] ? best_adv.data.data() + i * per
                                       : best_effort.data.data() + i * per;
    std::copy_n(src, per, adv_out.data.data() + i * per);
  }
  return Finalize(model, batch, adv_out, "cw_l2", 0.0, labels, false, {});
}

AdversarialExample FgsmTargetedOne(const ModelParams& model,
                                   const NdArray& image,
                                   const NdArray& target_label,
                                   double epsilon) {
  NdArray batch({1, image.dim(0), image.dim(1), image.dim(2)}, image.data);
  NdArray targets({1, target_label.size()}, target_label.data);
  return FgsmTargeted(model, batch, targets, epsilon)[0];
}

AdversarialExample FgsmUntargetedOne(const ModelParams& model,
                                     const NdArray& image, int label,
                                     double epsilon) {
  NdArray batch({1, image.dim(0), image.dim(1), image.dim(2)}, image.data);
  return FgsmUntargeted(model, batch, {label}, epsilon)[0];
}

int LeastLikelyClass(const ModelParams& model, const NdArray& image) {
  NdArray batch({1, image.dim(0), image.dim(1), image.dim(2)}, image.data);
  const NdArray logits = PredictLogits(model, batch);
  size_t worst = 0;
  for (size_t j = 1; j < logits.dim(1); ++j) {
    if (logits[j] < logits[worst]) worst = j;
  }
  return static_cast<int>(worst);
}

}  // namespace mtlat
