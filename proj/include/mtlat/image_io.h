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

#ifndef MTLAT_IMAGE_IO_H_
#define MTLAT_IMAGE_IO_H_

#include <string>

#include "mtlat/nd_array.h"

namespace mtlat {

// Binary PPM (P6, maxval 255). Pixels map to [0, 1] on read and are
// rounded to bytes on write.
NdArray ReadPpm(const std::string& path);
void WritePpm(const NdArray& image, const std::string& path);

}  // namespace mtlat

#endif  // MTLAT_IMAGE_IO_H_
