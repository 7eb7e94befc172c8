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

#ifndef MTLAT_CONFIG_H_
#define MTLAT_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtlat/augment.h"
#include "mtlat/bench.h"
#include "mtlat/dataset.h"

namespace mtlat {

// Everything a run needs, with defaults for every field. The master seed
// fully determines all derived randomness through DeriveSeed(master, tag):
//   dataset   <- "dataset"
//   training  <- "train" (then "train/epoch/<n>", "model-init" inside)
//   benchmark <- "bench" (then "bench/..." per row)
struct RunConfig {
  uint64_t seed = 0;
  int jobs = 1;
  std::string output_dir = "out";

  struct DatasetSpec {
    std::string kind = "synth";  // synth | idx | cifar
    // synth
    size_t classes = 8;
    size_t per_class = 100;
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    // cifar
    std::vector<std::string> train_files, test_files;
  } dataset;

  struct TrainSpec {
    std::string arch = "small-conv";
    TrainRecipe recipe;
  } train;

  BenchOptions bench;
  std::string calibrate_reference;  // checkpoint path; empty = default table

  static RunConfig Load(const std::string& path);
  static RunConfig FromJsonText(const std::string& text);
  // Full snapshot with every default resolved (the reproducibility spine).
  std::string ResolvedJson() const;
};

Dataset BuildDataset(const RunConfig& config);

}  // namespace mtlat

#endif  // MTLAT_CONFIG_H_
