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

#include "mtlat/dataset.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "mtlat/errors.h"
#include "mtlat/rng.h"

namespace mtlat {

namespace {

uint32_t ReadU32Be(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("truncated IDX header: " + path);
  return (static_cast<uint32_t>(b[0]) << 24) |
         (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Dataset::Split LoadIdx(const std::string& images_path,
                       const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw DataError("cannot open IDX images: " + images_path);
  if (ReadU32Be(imgs, images_path) != kIdxImagesMagic) {
    throw DataError("bad IDX images magic in " + images_path);
  }
  const uint32_t count = ReadU32Be(imgs, images_path);
  const uint32_t rows = ReadU32Be(imgs, images_path);
  const uint32_t cols = ReadU32Be(imgs, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw DataError("cannot open IDX labels: " + labels_path);
  if (ReadU32Be(labs, labels_path) != kIdxLabelsMagic) {
    throw DataError("bad IDX labels magic in " + labels_path);
  }
  const uint32_t label_count = ReadU32Be(labs, labels_path);
  if (label_count != count) {
    throw DataError("IDX label count " + std::to_string(label_count) +
                    " != image count " + std::to_string(count));
  }

  Dataset::Split split;
  std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
  for (uint32_t i = 0; i < count; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!imgs) throw DataError("truncated IDX image data: " + images_path);
    NdArray img({rows, cols, 3});
    for (size_t p = 0; p < buf.size(); ++p) {
      const double v = buf[p] / 255.0;
      img[p * 3 + 0] = v;
      img[p * 3 + 1] = v;
      img[p * 3 + 2] = v;
    }
    split.images.push_back(std::move(img));
    const int label = labs.get();
    if (label < 0) throw DataError("truncated IDX label data: " + labels_path);
    split.labels.push_back(label);
  }
  return split;
}

Dataset::Split LoadCifarBinary(const std::vector<std::string>& paths) {
  constexpr size_t kRecord = 3073;
  constexpr size_t kPlane = 1024;
  Dataset::Split split;
  for (const std::string& path : paths) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open CIFAR binary: " + path);
    const std::streamoff len = in.tellg();
    if (len <= 0 || len % static_cast<std::streamoff>(kRecord) != 0) {
      throw DataError("CIFAR binary length " + std::to_string(len) +
                      " is not a multiple of 3073: " + path);
    }
    in.seekg(0);
    std::vector<unsigned char> rec(kRecord);
    const size_t n = static_cast<size_t>(len) / kRecord;
    for (size_t i = 0; i < n; ++i) {
      in.read(reinterpret_cast<char*>(rec.data()), kRecord);
      if (!in) throw DataError("truncated CIFAR record in " + path);
      split.labels.push_back(rec[0]);
      NdArray img({32, 32, 3});
      for (size_t p = 0; p < kPlane; ++p) {
        img[p * 3 + 0] = rec[1 + p] / 255.0;
        img[p * 3 + 1] = rec[1 + kPlane + p] / 255.0;
        img[p * 3 + 2] = rec[1 + 2 * kPlane + p] / 255.0;
      }
      split.images.push_back(std::move(img));
    }
  }
  return split;
}

namespace {

constexpr size_t kSide = 32;

enum ShapeKind { kSquare = 0, kDisk, kTriangle, kCross, kNumShapes };

const double kBaseColors[4][3] = {
    {1.00, 0.15, 0.15},  // red
    {0.15, 1.00, 0.15},  // green
    {0.25, 0.40, 1.00},  // blue
    {1.00, 1.00, 0.20},  // yellow
};

bool InShape(ShapeKind kind, double u, double v, double s) {
  switch (kind) {
    case kSquare:
      return std::abs(u) <= s && std::abs(v) <= s;
    case kDisk:
      return u * u + v * v <= s * s;
    case kTriangle:
      // Apex up: (0,-s), (-s,s), (s,s).
      return v >= -s && v <= s && std::abs(u) <= (v + s) * 0.5;
    case kCross:
      return (std::abs(u) <= s / 3.0 && std::abs(v) <= s) ||
             (std::abs(v) <= s / 3.0 && std::abs(u) <= s);
    default:
      return false;
  }
}

NdArray SynthImage(size_t cls, Rng& rng) {
  const ShapeKind shape = static_cast<ShapeKind>(cls % kNumShapes);
  const size_t color = (cls / kNumShapes) % 4;

  const double bg_r = rng.Uniform(0.0, 0.30);
  const double bg_g = rng.Uniform(0.0, 0.30);
  const double bg_b = rng.Uniform(0.0, 0.30);
  const double half = rng.Uniform(5.0, 11.0);
  const double cx = rng.Uniform(half + 1.0, kSide - 1.0 - half);
  const double cy = rng.Uniform(half + 1.0, kSide - 1.0 - half);
  const double theta = rng.Uniform(-0.5, 0.5);
  const double ct = std::cos(theta), st = std::sin(theta);
  double col[3];
  const double intensity = rng.Uniform(0.70, 1.0);
  for (int c = 0; c < 3; ++c) {
    col[c] = std::clamp(
        kBaseColors[color][c] * intensity + rng.Uniform(-0.12, 0.12), 0.0,
        1.0);
  }

  NdArray img({kSide, kSide, 3});
  for (size_t y = 0; y < kSide; ++y) {
    for (size_t x = 0; x < kSide; ++x) {
      // 2x2 supersampled membership for soft edges.
      int hits = 0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double px = x + 0.25 + 0.5 * sx - cx;
          const double py = y + 0.25 + 0.5 * sy - cy;
          const double u = ct * px + st * py;
          const double v = -st * px + ct * py;
          if (InShape(shape, u, v, half)) ++hits;
        }
      }
      const double alpha = hits / 4.0;
      double* px = img.data.data() + (y * kSide + x) * 3;
      px[0] = bg_r * (1.0 - alpha) + col[0] * alpha;
      px[1] = bg_g * (1.0 - alpha) + col[1] * alpha;
      px[2] = bg_b * (1.0 - alpha) + col[2] * alpha;
    }
  }
  for (double& v : img.data) {
    v = std::clamp(v + 0.06 * rng.Normal(), 0.0, 1.0);
  }
  return img;
}

}  // namespace

Dataset SynthDataset(uint64_t seed, size_t n_classes, size_t n_per_class) {
  if (n_classes < 2) throw ConfigError("synth dataset needs >= 2 classes");
  if (n_classes > kNumShapes * 4) {
    throw ConfigError("synth dataset supports at most " +
                      std::to_string(kNumShapes * 4) + " classes");
  }
  Dataset ds;
  ds.classes = n_classes;
  ds.name = "synth";
  const size_t n_test = std::max<size_t>(1, n_per_class / 4);
  for (size_t cls = 0; cls < n_classes; ++cls) {
    for (size_t i = 0; i < n_per_class; ++i) {
      Rng rng(DeriveSeed(seed, "synth/train/" + std::to_string(cls) + "/" +
                                   std::to_string(i)));
      ds.train.images.push_back(SynthImage(cls, rng));
      ds.train.labels.push_back(static_cast<int>(cls));
    }
    for (size_t i = 0; i < n_test; ++i) {
      Rng rng(DeriveSeed(seed, "synth/test/" + std::to_string(cls) + "/" +
                                   std::to_string(i)));
      ds.test.images.push_back(SynthImage(cls, rng));
      ds.test.labels.push_back(static_cast<int>(cls));
    }
  }
  return ds;
}

std::vector<std::vector<size_t>> MakeBatches(size_t split_size,
                                             size_t batch_size, uint64_t seed,
                                             int epoch) {
  if (split_size == 0) throw DataError("cannot batch an empty split");
  if (batch_size < 4) {
    throw ConfigError("batch size must be >= 4, got " +
                      std::to_string(batch_size));
  }
  std::vector<size_t> perm(split_size);
  for (size_t i = 0; i < split_size; ++i) perm[i] = i;
  Rng rng(DeriveSeed(seed, "batches/" + std::to_string(epoch)));
  for (size_t i = split_size; i > 1; --i) {
    const size_t j = rng.UniformInt(i);
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < split_size; start += batch_size) {
    const size_t end = std::min(split_size, start + batch_size);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

}  // namespace mtlat
