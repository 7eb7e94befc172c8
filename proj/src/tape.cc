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

#include "mtlat/tape.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mtlat/errors.h"
#include "mtlat/kernels.h"
#include "mtlat/rng.h"

namespace mtlat {

namespace {

[[noreturn]] void ThrowShape(const char* op, const NdArray& a,
                             const NdArray& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " +
                   ShapeToString(a.shape) + " and " + ShapeToString(b.shape));
}

[[noreturn]] void ThrowShape1(const char* op, const NdArray& a,
                              const char* what) {
  throw ShapeError(std::string(op) + ": " + what + ", got shape " +
                   ShapeToString(a.shape));
}

}  // namespace

ValueId Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return ValueId{nodes_.size() - 1};
}

const Tape::Node& Tape::At(ValueId id) const { return nodes_[id.index]; }

const NdArray& Tape::Value(ValueId id) const { return nodes_[id.index].value; }

ValueId Tape::Leaf(NdArray value) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  return Push(std::move(n));
}

ValueId Tape::MatMul(ValueId a, ValueId b) {
  const NdArray& av = Value(a);
  const NdArray& bv = Value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    ThrowShape("matmul", av, bv);
  }
  const size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Node node;
  node.kind = OpKind::kMatMul;
  node.inputs = {a.index, b.index};
  node.value = NdArray({m, n});
  kernels::MatMul(av.data.data(), bv.data.data(), node.value.data.data(), m, k,
                  n);
  return Push(std::move(node));
}

ValueId Tape::Conv2d(ValueId x, ValueId w, size_t pad) {
  const NdArray& xv = Value(x);
  const NdArray& wv = Value(w);
  if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(3) != wv.dim(2)) {
    ThrowShape("conv2d", xv, wv);
  }
  const size_t batch = xv.dim(0), h = xv.dim(1), ww = xv.dim(2), c = xv.dim(3);
  const size_t kh = wv.dim(0), kw = wv.dim(1), f = wv.dim(3);
  if (h + 2 * pad < kh || ww + 2 * pad < kw) ThrowShape("conv2d", xv, wv);
  const size_t oh = h + 2 * pad - kh + 1;
  const size_t ow = ww + 2 * pad - kw + 1;
  const size_t patch = kh * kw * c;

  Node node;
  node.kind = OpKind::kConv2d;
  node.inputs = {x.index, w.index};
  node.pad = pad;
  node.saved = NdArray({batch * oh * ow, patch});
  kernels::Im2Col(xv.data.data(), batch, h, ww, c, kh, kw, pad,
                  node.saved.data.data());
  node.value = NdArray({batch, oh, ow, f});
  kernels::MatMul(node.saved.data.data(), wv.data.data(),
                  node.value.data.data(), batch * oh * ow, patch, f);
  return Push(std::move(node));
}

ValueId Tape::AddBias(ValueId x, ValueId b) {
  const NdArray& xv = Value(x);
  const NdArray& bv = Value(b);
  if (xv.rank() < 1 || bv.rank() != 1 ||
      xv.dim(xv.rank() - 1) != bv.dim(0)) {
    ThrowShape("add_bias", xv, bv);
  }
  const size_t n = bv.dim(0);
  const size_t rows = xv.size() / n;
  Node node;
  node.kind = OpKind::kAddBias;
  node.inputs = {x.index, b.index};
  node.value = NdArray(xv.shape);
  kernels::AddBias(xv.data.data(), bv.data.data(), node.value.data.data(),
                   rows, n);
  return Push(std::move(node));
}

ValueId Tape::Relu(ValueId x) {
  const NdArray& xv = Value(x);
  Node node;
  node.kind = OpKind::kRelu;
  node.inputs = {x.index};
  node.value = NdArray(xv.shape);
  kernels::ReluForward(xv.data.data(), node.value.data.data(), xv.size());
  return Push(std::move(node));
}

ValueId Tape::MaxPool2(ValueId x) {
  const NdArray& xv = Value(x);
  if (xv.rank() != 4 || xv.dim(1) < 2 || xv.dim(2) < 2) {
    ThrowShape1("max_pool2", xv, "expected [batch, h>=2, w>=2, c]");
  }
  const size_t batch = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
  Node node;
  node.kind = OpKind::kMaxPool2;
  node.inputs = {x.index};
  node.value = NdArray({batch, h / 2, w / 2, c});
  node.argmax.resize(node.value.size());
  kernels::MaxPool2Forward(xv.data.data(), batch, h, w, c,
                           node.value.data.data(), node.argmax.data());
  return Push(std::move(node));
}

ValueId Tape::Reshape(ValueId x, std::vector<size_t> shape) {
  const NdArray& xv = Value(x);
  if (ShapeNumel(shape) != xv.size()) {
    throw ShapeError("reshape: cannot view " + ShapeToString(xv.shape) +
                     " as " + ShapeToString(shape));
  }
  Node node;
  node.kind = OpKind::kReshape;
  node.inputs = {x.index};
  node.value = NdArray(std::move(shape), xv.data);
  return Push(std::move(node));
}

ValueId Tape::ScalarMul(ValueId x, double s) {
  const NdArray& xv = Value(x);
  Node node;
  node.kind = OpKind::kScalarMul;
  node.inputs = {x.index};
  node.scalar = s;
  node.value = NdArray(xv.shape);
  for (size_t i = 0; i < xv.size(); ++i) node.value[i] = s * xv[i];
  return Push(std::move(node));
}

ValueId Tape::Sum(ValueId x) {
  const NdArray& xv = Value(x);
  double acc = 0.0;
  for (double v : xv.data) acc += v;
  Node node;
  node.kind = OpKind::kSum;
  node.inputs = {x.index};
  node.value = NdArray::Scalar(acc);
  return Push(std::move(node));
}

ValueId Tape::SoftmaxCrossEntropy(ValueId logits, ValueId labels) {
  const NdArray& zv = Value(logits);
  const NdArray& yv = Value(labels);
  if (zv.rank() != 2 || !SameShape(zv, yv)) {
    ThrowShape("softmax_cross_entropy", zv, yv);
  }
  const size_t rows = zv.dim(0), n = zv.dim(1);
  Node node;
  node.kind = OpKind::kSoftmaxCrossEntropy;
  node.inputs = {logits.index, labels.index};
  node.saved = NdArray({rows, n});  // softmax probabilities
  double loss = 0.0;
  for (size_t r = 0; r < rows; ++r) {
    const double* z = zv.data.data() + r * n;
    const double* y = yv.data.data() + r * n;
    double* p = node.saved.data.data() + r * n;
    double m = z[0];
    for (size_t j = 1; j < n; ++j) m = std::max(m, z[j]);
    double denom = 0.0;
    for (size_t j = 0; j < n; ++j) denom += std::exp(z[j] - m);
    const double lse = m + std::log(denom);
    double row_loss = 0.0;
    for (size_t j = 0; j < n; ++j) {
      p[j] = std::exp(z[j] - m) / denom;
      row_loss += y[j] * (lse - z[j]);
    }
    loss += row_loss;
  }
  node.value = NdArray::Scalar(loss / static_cast<double>(rows));
  return Push(std::move(node));
}

NdArray Tape::Gradients::Get(const Tape& tape, ValueId id) const {
  if (id.index < grads_.size() && grads_[id.index].has_value()) {
    return *grads_[id.index];
  }
  return NdArray::Zeros(tape.Value(id).shape);
}

const NdArray* Tape::Gradients::MaybeGet(ValueId id) const {
  if (id.index < grads_.size() && grads_[id.index].has_value()) {
    return &*grads_[id.index];
  }
  return nullptr;
}

Tape::Gradients Tape::Backward(ValueId loss,
                               const std::vector<ValueId>& wanted) const {
  const NdArray& lv = Value(loss);
  if (!lv.IsScalar()) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        ShapeToString(lv.shape));
  }
  return BackwardSeeded(loss, NdArray::Scalar(1.0), wanted);
}

Tape::Gradients Tape::BackwardSeeded(ValueId output, const NdArray& seed,
                                     const std::vector<ValueId>& wanted) const {
  if (!SameShape(seed, Value(output))) {
    ThrowShape("backward_seeded", seed, Value(output));
  }

  // needed[v]: the gradient at v lies on a path to some wanted value.
  std::vector<char> needed(nodes_.size(), wanted.empty() ? 1 : 0);
  if (!wanted.empty()) {
    for (ValueId w : wanted) needed[w.index] = 1;
    for (size_t i = 0; i < nodes_.size(); ++i) {
      for (size_t in : nodes_[i].inputs) {
        if (needed[in]) {
          needed[i] = 1;
          break;
        }
      }
    }
  }

  Gradients out;
  out.grads_.resize(nodes_.size());
  out.grads_[output.index] = seed;

  auto& grads = out.grads_;
  auto accumulate = [&](size_t id, NdArray g) {
    if (!grads[id].has_value()) {
      grads[id] = std::move(g);
      return;
    }
    NdArray& dst = *grads[id];
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  };

  for (size_t i = nodes_.size(); i-- > 0;) {
    const Node& node = nodes_[i];
    if (node.kind == OpKind::kLeaf) continue;
    if (!needed[i] || !grads[i].has_value()) continue;
    const NdArray& g = *grads[i];

    switch (node.kind) {
      case OpKind::kMatMul: {
        const NdArray& a = nodes_[node.inputs[0]].value;
        const NdArray& b = nodes_[node.inputs[1]].value;
        const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
        if (needed[node.inputs[0]]) {
          NdArray da({m, k});
          kernels::MatMulTransB(g.data.data(), b.data.data(), da.data.data(),
                                m, k, n);
          accumulate(node.inputs[0], std::move(da));
        }
        if (needed[node.inputs[1]]) {
          NdArray db({k, n});
          kernels::MatMulTransA(a.data.data(), g.data.data(), db.data.data(),
                                m, k, n);
          accumulate(node.inputs[1], std::move(db));
        }
        break;
      }
      case OpKind::kConv2d: {
        const NdArray& x = nodes_[node.inputs[0]].value;
        const NdArray& w = nodes_[node.inputs[1]].value;
        const size_t batch = x.dim(0), h = x.dim(1), ww = x.dim(2),
                     c = x.dim(3);
        const size_t kh = w.dim(0), kw = w.dim(1), f = w.dim(3);
        const size_t rows = node.saved.dim(0);   // batch*oh*ow
        const size_t patch = node.saved.dim(1);  // kh*kw*c
        if (needed[node.inputs[1]]) {
          NdArray dw({kh, kw, c, f});
          kernels::MatMulTransA(node.saved.data.data(), g.data.data(),
                                dw.data.data(), rows, patch, f);
          accumulate(node.inputs[1], std::move(dw));
        }
        if (needed[node.inputs[0]]) {
          NdArray dcols({rows, patch});
          kernels::MatMulTransB(g.data.data(), w.data.data(),
                                dcols.data.data(), rows, patch, f);
          NdArray dx({batch, h, ww, c});
          kernels::Col2Im(dcols.data.data(), batch, h, ww, c, kh, kw, node.pad,
                          dx.data.data());
          accumulate(node.inputs[0], std::move(dx));
        }
        break;
      }
      case OpKind::kAddBias: {
        const NdArray& b = nodes_[node.inputs[1]].value;
        const size_t n = b.dim(0);
        const size_t rows = g.size() / n;
        if (needed[node.inputs[0]]) {
          accumulate(node.inputs[0], g);
        }
        if (needed[node.inputs[1]]) {
          NdArray db({n});
          kernels::BiasGrad(g.data.data(), db.data.data(), rows, n);
          accumulate(node.inputs[1], std::move(db));
        }
        break;
      }
      case OpKind::kRelu: {
        if (!needed[node.inputs[0]]) break;
        const NdArray& x = nodes_[node.inputs[0]].value;
        NdArray dx(x.shape);
        kernels::ReluBackward(x.data.data(), g.data.data(), dx.data.data(),
                              x.size());
        accumulate(node.inputs[0], std::move(dx));
        break;
      }
      case OpKind::kMaxPool2: {
        if (!needed[node.inputs[0]]) break;
        const NdArray& x = nodes_[node.inputs[0]].value;
        const size_t batch = x.dim(0), h = x.dim(1), w = x.dim(2),
                     c = x.dim(3);
        NdArray dx(x.shape);
        kernels::MaxPool2Backward(g.data.data(), node.argmax.data(), batch, h,
                                  w, c, dx.data.data());
        accumulate(node.inputs[0], std::move(dx));
        break;
      }
      case OpKind::kReshape: {
        if (!needed[node.inputs[0]]) break;
        const NdArray& x = nodes_[node.inputs[0]].value;
        accumulate(node.inputs[0], NdArray(x.shape, g.data));
        break;
      }
      case OpKind::kScalarMul: {
        if (!needed[node.inputs[0]]) break;
        NdArray dx(g.shape);
        for (size_t j = 0; j < g.size(); ++j) dx[j] = node.scalar * g[j];
        accumulate(node.inputs[0], std::move(dx));
        break;
      }
      case OpKind::kSum: {
        if (!needed[node.inputs[0]]) break;
        const NdArray& x = nodes_[node.inputs[0]].value;
        accumulate(node.inputs[0], NdArray::Full(x.shape, g[0]));
        break;
      }
      case OpKind::kSoftmaxCrossEntropy: {
        const NdArray& z = nodes_[node.inputs[0]].value;
        const NdArray& y = nodes_[node.inputs[1]].value;
        const NdArray& p = node.saved;
        const size_t rows = z.dim(0), n = z.dim(1);
        const double up = g[0] / static_cast<double>(rows);
        if (needed[node.inputs[0]]) {
          NdArray dz(z.shape);
          for (size_t r = 0; r < rows; ++r) {
            double ysum = 0.0;
            for (size_t j = 0; j < n; ++j) ysum += y[r * n + j];
            for (size_t j = 0; j < n; ++j) {
              dz[r * n + j] = up * (p[r * n + j] * ysum - y[r * n + j]);
            }
          }
          accumulate(node.inputs[0], std::move(dz));
        }
        if (needed[node.inputs[1]]) {
          NdArray dy(y.shape);
          for (size_t j = 0; j < y.size(); ++j) {
            dy[j] = up * -std::log(p[j]);
          }
          accumulate(node.inputs[1], std::move(dy));
        }
        break;
      }
      case OpKind::kLeaf:
        break;
    }
  }
  return out;
}

double GradCheck(const std::function<double(const NdArray&)>& f,
                 const NdArray& analytic_grad, const NdArray& point, double h,
                 size_t max_coords, uint64_t seed,
                 const std::function<bool(size_t)>& skip) {
  std::vector<size_t> coords;
  const size_t n = point.size();
  if (max_coords == 0 || max_coords >= n) {
    coords.resize(n);
    for (size_t i = 0; i < n; ++i) coords[i] = i;
  } else {
    Rng rng(SplitMix64(seed ^ 0x6772616463686Bull));
    for (size_t i = 0; i < max_coords; ++i) {
      coords.push_back(rng.UniformInt(n));
    }
  }

  double max_rel = 0.0;
  NdArray probe = point;
  for (size_t i : coords) {
    if (skip && skip(i)) continue;
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad[i];
    const double rel =
        std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace mtlat
