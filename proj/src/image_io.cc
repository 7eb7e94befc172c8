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

#include "mtlat/image_io.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mtlat/errors.h"

namespace mtlat {

namespace {

// Skips whitespace and '#' comments between PPM header tokens.
int NextHeaderInt(std::istream& in, const std::string& path) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  in >> value;
  if (!in) throw DataError("malformed PPM header: " + path);
  return value;
}

}  // namespace

NdArray ReadPpm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') {
    throw DataError("not a binary PPM (P6): " + path);
  }
  const int width = NextHeaderInt(in, path);
  const int height = NextHeaderInt(in, path);
  const int maxval = NextHeaderInt(in, path);
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw DataError("unsupported PPM geometry in " + path);
  }
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raw(static_cast<size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw DataError("truncated PPM raster: " + path);
  NdArray img({static_cast<size_t>(height), static_cast<size_t>(width), 3});
  for (size_t i = 0; i < raw.size(); ++i) img[i] = raw[i] / 255.0;
  return img;
}

void WritePpm(const NdArray& image, const std::string& path) {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw ShapeError("WritePpm expects [h, w, 3], got " +
                     ShapeToString(image.shape));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P6\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  std::vector<unsigned char> raw(image.size());
  for (size_t i = 0; i < image.size(); ++i) {
    raw[i] = static_cast<unsigned char>(
        std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("short write: " + path);
}

}  // namespace mtlat
