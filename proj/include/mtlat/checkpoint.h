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

#ifndef MTLAT_CHECKPOINT_H_
#define MTLAT_CHECKPOINT_H_

#include <string>

#include "mtlat/model.h"

namespace mtlat {

// Checkpoint layout (bit-exact contract):
//   8-byte magic "MTLATCKP", 1 version byte (1),
//   4-byte little-endian manifest length, UTF-8 JSON manifest
//   {arch, input [h,w,c], classes, seed, params: [{name, shape}]},
//   then each parameter as raw little-endian float64 in manifest order.
void SaveCheckpoint(const ModelParams& model, const std::string& path);
ModelParams LoadCheckpoint(const std::string& path);

}  // namespace mtlat

#endif  // MTLAT_CHECKPOINT_H_
