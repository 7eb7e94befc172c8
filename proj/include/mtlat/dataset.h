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

#ifndef MTLAT_DATASET_H_
#define MTLAT_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtlat/nd_array.h"

namespace mtlat {

// Images are [h, w, c] tensors with every pixel in [0, 1]; labels are
// integer class ids in [0, classes).
struct Dataset {
  struct Split {
    std::vector<NdArray> images;
    std::vector<int> labels;
    size_t size() const { return images.size(); }
  };
  Split train, test;
  size_t classes = 0;
  std::string name;
};

// IDX (big-endian magic 0x803 for images, 0x801 for labels); pixels are
// divided by 255 and grayscale is replicated to 3 channels.
Dataset::Split LoadIdx(const std::string& images_path,
                       const std::string& labels_path);

// CIFAR-10 binary: concatenation of 3073-byte records
// (1 label + 3x1024 channel-planar pixels), decoded to [32, 32, 3].
Dataset::Split LoadCifarBinary(const std::vector<std::string>& paths);

// Deterministic 32x32x3 dataset of colored geometric shapes;
// class = shape x color combination. Train gets n_per_class images per
// class, test gets n_per_class/4 (at least 1).
Dataset SynthDataset(uint64_t seed, size_t n_classes, size_t n_per_class);

// Seeded shuffled batching: the permutation is a pure function of
// (seed, epoch); the last partial batch is kept. batch_size >= 4 because
// the augmented training modes consume 4 samples per couple.
std::vector<std::vector<size_t>> MakeBatches(size_t split_size,
                                             size_t batch_size, uint64_t seed,
                                             int epoch);

}  // namespace mtlat

#endif  // MTLAT_DATASET_H_
