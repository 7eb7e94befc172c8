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

#include "mtlat/config.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mtlat/errors.h"
#include "mtlat/rng.h"

namespace mtlat {

namespace {

using nlohmann::json;

template <typename T>
void Maybe(const json& j, const char* key, T* out) {
  if (j.contains(key)) {
    try {
      *out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " +
                        e.what());
    }
  }
}

}  // namespace

RunConfig RunConfig::FromJsonText(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Maybe(j, "seed", &c.seed);
  Maybe(j, "jobs", &c.jobs);
  Maybe(j, "output_dir", &c.output_dir);
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    Maybe(d, "kind", &c.dataset.kind);
    Maybe(d, "classes", &c.dataset.classes);
    Maybe(d, "per_class", &c.dataset.per_class);
    Maybe(d, "train_images", &c.dataset.train_images);
    Maybe(d, "train_labels", &c.dataset.train_labels);
    Maybe(d, "test_images", &c.dataset.test_images);
    Maybe(d, "test_labels", &c.dataset.test_labels);
    Maybe(d, "train_files", &c.dataset.train_files);
    Maybe(d, "test_files", &c.dataset.test_files);
    if (c.dataset.kind != "synth" && c.dataset.kind != "idx" &&
        c.dataset.kind != "cifar") {
      throw ConfigError("dataset.kind must be synth, idx or cifar");
    }
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    Maybe(t, "arch", &c.train.arch);
    std::string mode = TrainModeName(c.train.recipe.mode);
    Maybe(t, "mode", &mode);
    c.train.recipe.mode = TrainModeFromName(mode);
    Maybe(t, "epochs", &c.train.recipe.epochs);
    Maybe(t, "batch_size", &c.train.recipe.batch_size);
    Maybe(t, "mixup_alpha", &c.train.recipe.mixup.alpha);
    Maybe(t, "eps_max", &c.train.recipe.tlat.eps_max);
    Maybe(t, "lr", &c.train.recipe.adam.lr);
    Maybe(t, "weight_decay", &c.train.recipe.adam.weight_decay);
    Maybe(t, "decay_epochs", &c.train.recipe.adam.decay_epochs);
    if (c.train.recipe.mixup.alpha <= 0.0) {
      throw ConfigError("train.mixup_alpha must be > 0");
    }
    if (c.train.recipe.tlat.eps_max <= 0.0 ||
        c.train.recipe.tlat.eps_max >= 1.0) {
      throw ConfigError("train.eps_max must be in (0, 1)");
    }
  }

  if (j.contains("bench")) {
    const json& b = j.at("bench");
    Maybe(b, "pgd_epsilon", &c.bench.pgd_epsilon);
    Maybe(b, "attack_iterations", &c.bench.attack_iterations);
    Maybe(b, "mi_eps_low", &c.bench.mi_eps_low);
    Maybe(b, "mi_eps_high", &c.bench.mi_eps_high);
    Maybe(b, "cw_iterations", &c.bench.cw_iterations);
    Maybe(b, "cw_kappa", &c.bench.cw_kappa);
    Maybe(b, "cw_subset", &c.bench.cw_subset);
  }
  Maybe(j, "calibrate_reference", &c.calibrate_reference);
  return c;
}

RunConfig RunConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return FromJsonText(buf.str());
}

std::string RunConfig::ResolvedJson() const {
  json j;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["output_dir"] = output_dir;
  j["seed_derivation"] = {{"dataset", "DeriveSeed(seed, \"dataset\")"},
                          {"train", "DeriveSeed(seed, \"train\")"},
                          {"bench", "DeriveSeed(seed, \"bench\")"}};
  json d;
  d["kind"] = dataset.kind;
  if (dataset.kind == "synth") {
    d["classes"] = dataset.classes;
    d["per_class"] = dataset.per_class;
  } else if (dataset.kind == "idx") {
    d["train_images"] = dataset.train_images;
    d["train_labels"] = dataset.train_labels;
    d["test_images"] = dataset.test_images;
    d["test_labels"] = dataset.test_labels;
  } else {
    d["train_files"] = dataset.train_files;
    d["test_files"] = dataset.test_files;
  }
  if (dataset.kind != "synth") d["classes"] = dataset.classes;
  j["dataset"] = std::move(d);

  j["train"] = {{"arch", train.arch},
                {"mode", TrainModeName(train.recipe.mode)},
                {"epochs", train.recipe.epochs},
                {"batch_size", train.recipe.batch_size},
                {"mixup_alpha", train.recipe.mixup.alpha},
                {"eps_max", train.recipe.tlat.eps_max},
                {"lr", train.recipe.adam.lr},
                {"weight_decay", train.recipe.adam.weight_decay},
                {"decay_epochs", train.recipe.adam.decay_epochs}};
  j["bench"] = {{"pgd_epsilon", bench.pgd_epsilon},
                {"attack_iterations", bench.attack_iterations},
                {"mi_eps_low", bench.mi_eps_low},
                {"mi_eps_high", bench.mi_eps_high},
                {"cw_iterations", bench.cw_iterations},
                {"cw_kappa", bench.cw_kappa},
                {"cw_subset", bench.cw_subset}};
  j["calibrate_reference"] = calibrate_reference;
  return j.dump(2) + "\n";
}

Dataset BuildDataset(const RunConfig& config) {
  const uint64_t seed = DeriveSeed(config.seed, "dataset");
  if (config.dataset.kind == "synth") {
    return SynthDataset(seed, config.dataset.classes, config.dataset.per_class);
  }
  Dataset ds;
  if (config.dataset.kind == "idx") {
    if (config.dataset.train_images.empty() ||
        config.dataset.test_images.empty()) {
      throw ConfigError("idx dataset needs train/test image and label paths");
    }
    ds.train = LoadIdx(config.dataset.train_images, config.dataset.train_labels);
    ds.test = LoadIdx(config.dataset.test_images, config.dataset.test_labels);
    ds.name = "idx";
  } else {
    if (config.dataset.train_files.empty() || config.dataset.test_files.empty()) {
      throw ConfigError("cifar dataset needs train_files and test_files");
    }
    ds.train = LoadCifarBinary(config.dataset.train_files);
    ds.test = LoadCifarBinary(config.dataset.test_files);
    ds.name = "cifar";
  }
  int max_label = 0;
  for (int l : ds.train.labels) max_label = std::max(max_label, l);
  for (int l : ds.test.labels) max_label = std::max(max_label, l);
  ds.classes = static_cast<size_t>(max_label) + 1;
  if (ds.classes < 2) throw DataError("dataset has fewer than 2 classes");
  return ds;
}

}  // namespace mtlat
