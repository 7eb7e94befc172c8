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

#include "mtlat/model.h"

#include <cmath>
#include <cstring>

#include "mtlat/errors.h"
#include "mtlat/rng.h"

namespace mtlat {

namespace {

constexpr size_t kConv1Filters = 16;
constexpr size_t kConv2Filters = 32;
constexpr size_t kConvHidden = 128;
constexpr size_t kMlpHidden = 256;
constexpr size_t kEvalChunk = 256;

NdArray HeUniform(std::vector<size_t> shape, size_t fan_in, Rng& rng) {
  NdArray w(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.Uniform(-limit, limit);
  return w;
}

}  // namespace

const char* ArchName(Arch arch) {
  return arch == Arch::kSmallConv ? "small-conv" : "small-mlp";
}

Arch ArchFromName(const std::string& name) {
  if (name == "small-conv") return Arch::kSmallConv;
  if (name == "small-mlp") return Arch::kSmallMlp;
  throw ConfigError("unknown architecture: " + name);
}

std::vector<std::string> ParamNames(Arch arch) {
  if (arch == Arch::kSmallConv) {
    return {"conv1_w", "conv1_b", "conv2_w", "conv2_b",
            "fc1_w",   "fc1_b",   "fc2_w",   "fc2_b"};
  }
  return {"fc1_w", "fc1_b", "fc2_w", "fc2_b", "fc3_w", "fc3_b"};
}

ModelParams InitModel(Arch arch, size_t height, size_t width, size_t channels,
                      size_t classes, uint64_t seed) {
  if (classes < 2) {
    throw ContractError("model requires at least 2 classes, got " +
                        std::to_string(classes));
  }
  ModelParams m;
  m.arch = arch;
  m.height = height;
  m.width = width;
  m.channels = channels;
  m.classes = classes;
  m.init_seed = seed;
  Rng rng(DeriveSeed(seed, std::string("init/") + ArchName(arch)));

  if (arch == Arch::kSmallConv) {
    if (height / 4 == 0 || width / 4 == 0) {
      throw ContractError("small-conv needs inputs of at least 4x4");
    }
    const size_t flat = (height / 4) * (width / 4) * kConv2Filters;
    m.params.push_back(
        HeUniform({3, 3, channels, kConv1Filters}, 9 * channels, rng));
    m.params.push_back(NdArray({kConv1Filters}));
    m.params.push_back(
        HeUniform({3, 3, kConv1Filters, kConv2Filters}, 9 * kConv1Filters,
                  rng));
    m.params.push_back(NdArray({kConv2Filters}));
    m.params.push_back(HeUniform({flat, kConvHidden}, flat, rng));
    m.params.push_back(NdArray({kConvHidden}));
    m.params.push_back(HeUniform({kConvHidden, classes}, kConvHidden, rng));
    m.params.push_back(NdArray({classes}));
  } else {
    const size_t flat = height * width * channels;
    m.params.push_back(HeUniform({flat, kMlpHidden}, flat, rng));
    m.params.push_back(NdArray({kMlpHidden}));
    m.params.push_back(HeUniform({kMlpHidden, kMlpHidden}, kMlpHidden, rng));
    m.params.push_back(NdArray({kMlpHidden}));
    m.params.push_back(HeUniform({kMlpHidden, classes}, kMlpHidden, rng));
    m.params.push_back(NdArray({classes}));
  }
  return m;
}

ValueId ForwardLogits(Tape& tape, const ModelParams& model, ValueId input,
                      std::vector<ValueId>* param_ids) {
  const NdArray& x = tape.Value(input);
  if (x.rank() != 4 || x.dim(1) != model.height || x.dim(2) != model.width ||
      x.dim(3) != model.channels) {
    throw ShapeError("forward: batch shape " + ShapeToString(x.shape) +
                     " does not match model input (" +
                     std::to_string(model.height) + ", " +
                     std::to_string(model.width) + ", " +
                     std::to_string(model.channels) + ")");
  }
  const size_t batch = x.dim(0);
  std::vector<ValueId> p;
  p.reserve(model.params.size());
  for (const NdArray& w : model.params) p.push_back(tape.Leaf(w));
  if (param_ids) *param_ids = p;

  if (model.arch == Arch::kSmallConv) {
    ValueId h1 = tape.Relu(tape.AddBias(tape.Conv2d(input, p[0], 1), p[1]));
    ValueId p1 = tape.MaxPool2(h1);
    ValueId h2 = tape.Relu(tape.AddBias(tape.Conv2d(p1, p[2], 1), p[3]));
    ValueId p2 = tape.MaxPool2(h2);
    const size_t flat = (model.height / 4) * (model.width / 4) * kConv2Filters;
    ValueId f = tape.Reshape(p2, {batch, flat});
    ValueId h3 = tape.Relu(tape.AddBias(tape.MatMul(f, p[4]), p[5]));
    return tape.AddBias(tape.MatMul(h3, p[6]), p[7]);
  }

  const size_t flat = model.height * model.width * model.channels;
  ValueId f = tape.Reshape(input, {batch, flat});
  ValueId h1 = tape.Relu(tape.AddBias(tape.MatMul(f, p[0]), p[1]));
  ValueId h2 = tape.Relu(tape.AddBias(tape.MatMul(h1, p[2]), p[3]));
  return tape.AddBias(tape.MatMul(h2, p[4]), p[5]);
}

NdArray PredictLogits(const ModelParams& model, const NdArray& batch) {
  Tape tape;
  ValueId x = tape.Leaf(batch);
  ValueId logits = ForwardLogits(tape, model, x);
  return tape.Value(logits);
}

std::vector<int> PredictClasses(const ModelParams& model,
                                const NdArray& batch) {
  const NdArray logits = PredictLogits(model, batch);
  const size_t b = logits.dim(0), n = logits.dim(1);
  std::vector<int> out(b);
  for (size_t r = 0; r < b; ++r) {
    size_t best = 0;
    for (size_t j = 1; j < n; ++j) {
      if (logits[r * n + j] > logits[r * n + best]) best = j;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

void ValidateLabels(const NdArray& labels) {
  const size_t n = labels.dim(labels.rank() - 1);
  const size_t rows = labels.size() / n;
  for (size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double v = labels[r * n + j];
      if (v < 0.0) {
        throw DataError("label row " + std::to_string(r) +
                        " has negative entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DataError("label row " + std::to_string(r) + " sums to " +
                      std::to_string(sum) + ", expected 1");
    }
  }
}

double LossAndGrad(const ModelParams& model, const NdArray& batch,
                   const NdArray& labels, std::vector<NdArray>* grads) {
  ValidateLabels(labels);
  Tape tape;
  ValueId x = tape.Leaf(batch);
  std::vector<ValueId> param_ids;
  ValueId logits = ForwardLogits(tape, model, x, &param_ids);
  ValueId y = tape.Leaf(labels);
  ValueId loss = tape.SoftmaxCrossEntropy(logits, y);
  if (grads) {
    Tape::Gradients g = tape.Backward(loss, param_ids);
    grads->clear();
    grads->reserve(param_ids.size());
    for (ValueId id : param_ids) grads->push_back(g.Get(tape, id));
  }
  return tape.Value(loss)[0];
}

NdArray StackBatch(const std::vector<NdArray>& images,
                   const std::vector<size_t>& indices) {
  if (indices.empty()) throw DataError("StackBatch: empty batch");
  const NdArray& first = images[indices[0]];
  const size_t per = first.size();
  NdArray out({indices.size(), first.dim(0), first.dim(1), first.dim(2)});
  for (size_t i = 0; i < indices.size(); ++i) {
    const NdArray& img = images[indices[i]];
    if (!SameShape(img, first)) {
      throw ShapeError("StackBatch: image " + std::to_string(indices[i]) +
                       " shape " + ShapeToString(img.shape) +
                       " differs from " + ShapeToString(first.shape));
    }
    std::memcpy(out.data.data() + i * per, img.data.data(),
                per * sizeof(double));
  }
  return out;
}

size_t CountCorrect(const ModelParams& model,
                    const std::vector<NdArray>& images,
                    const std::vector<int>& labels) {
  size_t correct = 0;
  std::vector<size_t> chunk;
  for (size_t start = 0; start < images.size(); start += kEvalChunk) {
    const size_t end = std::min(images.size(), start + kEvalChunk);
    chunk.clear();
    for (size_t i = start; i < end; ++i) chunk.push_back(i);
    const std::vector<int> pred =
        PredictClasses(model, StackBatch(images, chunk));
    for (size_t i = start; i < end; ++i) {
      if (pred[i - start] == labels[i]) ++correct;
    }
  }
  return correct;
}

NdArray OneHot(size_t cls, size_t n) {
  NdArray y({n});
  y[cls] = 1.0;
  return y;
}

}  // namespace mtlat
