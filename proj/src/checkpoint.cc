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

#include "mtlat/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "mtlat/errors.h"

namespace mtlat {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'L', 'A', 'T', 'C', 'K', 'P'};
constexpr uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void WriteU32Le(std::ofstream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF),
               static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

uint32_t ReadU32Le(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("checkpoint truncated in header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void SaveCheckpoint(const ModelParams& model, const std::string& path) {
  nlohmann::json manifest;
  manifest["arch"] = ArchName(model.arch);
  manifest["input"] = {model.height, model.width, model.channels};
  manifest["classes"] = model.classes;
  manifest["seed"] = model.init_seed;
  nlohmann::json params = nlohmann::json::array();
  const std::vector<std::string> names = ParamNames(model.arch);
  if (names.size() != model.params.size()) {
    throw ContractError("checkpoint: parameter count does not match arch");
  }
  for (size_t i = 0; i < model.params.size(); ++i) {
    params.push_back({{"name", names[i]}, {"shape", model.params[i].shape}});
  }
  manifest["params"] = std::move(params);
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  out.put(static_cast<char>(kVersion));
  WriteU32Le(out, static_cast<uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const NdArray& p : model.params) {
    out.write(reinterpret_cast<const char*>(p.data.data()),
              static_cast<std::streamsize>(p.data.size() * sizeof(double)));
  }
  out.flush();
  if (!out) throw DataError("short write while saving checkpoint: " + path);
}

ModelParams LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("not a checkpoint (bad magic): " + path);
  }
  const int version = in.get();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " in " + path);
  }
  const uint32_t manifest_len = ReadU32Le(in);
  std::string text(manifest_len, '\0');
  in.read(text.data(), manifest_len);
  if (!in) throw DataError("checkpoint truncated in manifest: " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint manifest is not valid JSON: ") +
                    e.what());
  }

  ModelParams model;
  model.arch = ArchFromName(manifest.at("arch").get<std::string>());
  const auto input = manifest.at("input");
  model.height = input.at(0).get<size_t>();
  model.width = input.at(1).get<size_t>();
  model.channels = input.at(2).get<size_t>();
  model.classes = manifest.at("classes").get<size_t>();
  model.init_seed = manifest.at("seed").get<uint64_t>();

  const std::vector<std::string> names = ParamNames(model.arch);
  const auto& params = manifest.at("params");
  if (params.size() != names.size()) {
    throw DataError("checkpoint manifest lists " +
                    std::to_string(params.size()) + " arrays, expected " +
                    std::to_string(names.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].at("name").get<std::string>() != names[i]) {
      throw DataError("checkpoint manifest parameter " + std::to_string(i) +
                      " is '" + params[i].at("name").get<std::string>() +
                      "', expected '" + names[i] + "'");
    }
    const std::vector<size_t> shape =
        params[i].at("shape").get<std::vector<size_t>>();
    NdArray arr(shape);
    in.read(reinterpret_cast<char*>(arr.data.data()),
            static_cast<std::streamsize>(arr.data.size() * sizeof(double)));
    if (!in) {
      throw DataError("checkpoint truncated in parameter '" + names[i] +
                      "': " + path);
    }
    model.params.push_back(std::move(arr));
  }
  // Shape manifest must be consistent with the architecture.
  const ModelParams ref = InitModel(model.arch, model.height, model.width,
                                    model.channels, model.classes, 0);
  for (size_t i = 0; i < names.size(); ++i) {
    if (!SameShape(ref.params[i], model.params[i])) {
      throw DataError("checkpoint parameter '" + names[i] + "' has shape " +
                      ShapeToString(model.params[i].shape) + ", expected " +
                      ShapeToString(ref.params[i].shape));
    }
  }
  return model;
}

}  // namespace mtlat
