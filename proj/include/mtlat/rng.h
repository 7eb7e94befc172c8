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

#ifndef MTLAT_RNG_H_
#define MTLAT_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace mtlat {

// SplitMix64 finalizer; used both as a mixer and to derive child seeds.
uint64_t SplitMix64(uint64_t x);

// Deterministic seed derivation: every random stream in a run is a pure
// function of (master_seed, tag). Tags are slash-separated paths such as
// "train/epoch/3" or "bench/corrupt/gaussian_noise/2/17".
uint64_t DeriveSeed(uint64_t master_seed, std::string_view tag);

// All sampling is hand-rolled on top of mt19937_64 so that a fixed seed gives
// bit-identical streams independent of the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t NextU64() { return gen_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double Uniform();
  double Uniform(double lo, double hi);

  // Unbiased integer in [0, n), n >= 1.
  uint64_t UniformInt(uint64_t n);

  // Standard normal via the Marsaglia polar method (no trig, no cached spare).
  double Normal();

  // Gamma(alpha, 1) via Marsaglia-Tsang squeeze; alpha < 1 handled with the
  // boost X = Gamma(alpha + 1) * U^(1/alpha).
  double Gamma(double alpha);

  // Beta(a, b) as the gamma ratio X / (X + Y).
  double Beta(double a, double b);

  // Poisson: Knuth product method (adequate for the photon-count rates used
  // by the shot-noise corruption).
  int64_t Poisson(double lambda);

 private:
  std::mt19937_64 gen_;
};

}  // namespace mtlat

#endif  // MTLAT_RNG_H_
