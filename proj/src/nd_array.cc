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

#include "mtlat/nd_array.h"

#include <cmath>
#include <sstream>

#include "mtlat/errors.h"

namespace mtlat {

size_t ShapeNumel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

NdArray::NdArray(std::vector<size_t> s)
    : shape(std::move(s)), data(ShapeNumel(shape), 0.0) {}

NdArray::NdArray(std::vector<size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (ShapeNumel(shape) != data.size()) {
    throw ShapeError("NdArray: shape " + ShapeToString(shape) +
                     " does not match data length " +
                     std::to_string(data.size()));
  }
}

NdArray NdArray::Full(std::vector<size_t> s, double v) {
  NdArray a(std::move(s));
  for (double& x : a.data) x = v;
  return a;
}

NdArray NdArray::FromVector(std::vector<double> d) {
  const size_t n = d.size();
  return NdArray({n}, std::move(d));
}

bool NdArray::AllFinite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool SameShape(const NdArray& a, const NdArray& b) {
  return a.shape == b.shape;
}

std::string ShapeToString(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

}  // namespace mtlat
