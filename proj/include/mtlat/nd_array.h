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

#ifndef MTLAT_ND_ARRAY_H_
#define MTLAT_ND_ARRAY_H_

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mtlat {

// Dense row-major tensor of 64-bit floats. Everything in the toolkit
// (images, parameters, gradients) is one of these.
struct NdArray {
  std::vector<size_t> shape;
  std::vector<double> data;

  NdArray() = default;
  explicit NdArray(std::vector<size_t> s);
  NdArray(std::vector<size_t> s, std::vector<double> d);

  static NdArray Zeros(std::vector<size_t> s) { return NdArray(std::move(s)); }
  static NdArray Full(std::vector<size_t> s, double v);
  static NdArray Scalar(double v) { return NdArray({1}, {v}); }
  static NdArray FromVector(std::vector<double> d);

  size_t size() const { return data.size(); }
  bool IsScalar() const { return data.size() == 1; }

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  // Rank and dimension helpers; dim(i) is bounds-checked in debug only.
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape[i]; }

  bool AllFinite() const;
};

size_t ShapeNumel(const std::vector<size_t>& shape);
bool SameShape(const NdArray& a, const NdArray& b);
std::string ShapeToString(const std::vector<size_t>& shape);

}  // namespace mtlat

#endif  // MTLAT_ND_ARRAY_H_
