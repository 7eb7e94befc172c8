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

#include "mtlat/corruptions.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mtlat/errors.h"
#include "mtlat/rng.h"

namespace mtlat {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline double Clip01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Dims {
  size_t h, w, c;
};

Dims ImageDims(const NdArray& img) {
  if (img.rank() != 3) {
    throw ShapeError("corruption expects [h, w, c] image, got " +
                     ShapeToString(img.shape));
  }
  return {img.dim(0), img.dim(1), img.dim(2)};
}

inline double AtClamped(const NdArray& img, const Dims& d, long y, long x,
                        size_t c) {
  y = std::clamp<long>(y, 0, static_cast<long>(d.h) - 1);
  x = std::clamp<long>(x, 0, static_cast<long>(d.w) - 1);
  return img[(static_cast<size_t>(y) * d.w + static_cast<size_t>(x)) * d.c +
             c];
}

// Bilinear sample with coordinates clamped to the frame (no border fill).
double SampleClamped(const NdArray& img, const Dims& d, double y, double x,
                     size_t c) {
  const long y0 = static_cast<long>(std::floor(y));
  const long x0 = static_cast<long>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  const double v00 = AtClamped(img, d, y0, x0, c);
  const double v01 = AtClamped(img, d, y0, x0 + 1, c);
  const double v10 = AtClamped(img, d, y0 + 1, x0, c);
  const double v11 = AtClamped(img, d, y0 + 1, x0 + 1, c);
  return v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx +
         v10 * fy * (1 - fx) + v11 * fy * fx;
}

// Bilinear sample treating everything outside the frame as exactly zero.
double SampleZeroFill(const NdArray& img, const Dims& d, double y, double x,
                      size_t c) {
  const long y0 = static_cast<long>(std::floor(y));
  const long x0 = static_cast<long>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  auto at = [&](long yy, long xx) -> double {
    if (yy < 0 || yy >= static_cast<long>(d.h) || xx < 0 ||
        xx >= static_cast<long>(d.w)) {
      return 0.0;
    }
    return img[(static_cast<size_t>(yy) * d.w + static_cast<size_t>(xx)) *
                   d.c +
               c];
  };
  const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
  const double w10 = fy * (1 - fx), w11 = fy * fx;
  double acc = 0.0;
  if (w00 != 0.0) acc += w00 * at(y0, x0);
  if (w01 != 0.0) acc += w01 * at(y0, x0 + 1);
  if (w10 != 0.0) acc += w10 * at(y0 + 1, x0);
  if (w11 != 0.0) acc += w11 * at(y0 + 1, x0 + 1);
  return acc;
}

NdArray Convolve2d(const NdArray& img, const std::vector<double>& kernel,
                   size_t kh, size_t kw) {
  const Dims d = ImageDims(img);
  NdArray out(img.shape);
  const long ry = static_cast<long>(kh) / 2;
  const long rx = static_cast<long>(kw) / 2;
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      for (size_t c = 0; c < d.c; ++c) {
        double acc = 0.0;
        for (size_t ky = 0; ky < kh; ++ky) {
          for (size_t kx = 0; kx < kw; ++kx) {
            acc += kernel[ky * kw + kx] *
                   AtClamped(img, d, static_cast<long>(y) + ky - ry,
                             static_cast<long>(x) + kx - rx, c);
          }
        }
        out[(y * d.w + x) * d.c + c] = Clip01(acc);
      }
    }
  }
  return out;
}

// Separable Gaussian blur on a single-channel field, replicate edges.
void GaussBlurField(std::vector<double>& field, size_t h, size_t w,
                    double sigma) {
  if (sigma <= 0.0) return;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;
  std::vector<double> tmp(field.size());
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const long xx = std::clamp<long>(static_cast<long>(x) + i, 0,
                                         static_cast<long>(w) - 1);
        acc += k[i + r] * field[y * w + xx];
      }
      tmp[y * w + x] = acc;
    }
  }
  for (size_t y = 0; y < h; ++y) {
    for (size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        const long yy = std::clamp<long>(static_cast<long>(y) + i, 0,
                                         static_cast<long>(h) - 1);
        acc += k[i + r] * tmp[yy * w + x];
      }
      field[y * w + x] = acc;
    }
  }
}

// Multi-octave value noise normalized to [0, 1].
std::vector<double> FractalNoise(size_t h, size_t w, Rng& rng) {
  std::vector<double> out(h * w, 0.0);
  double amplitude = 1.0;
  for (size_t cell = 16; cell >= 2; cell /= 2) {
    const size_t gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> grid(gh * gw);
    for (double& v : grid) v = rng.Uniform();
    for (size_t y = 0; y < h; ++y) {
      const double gy = static_cast<double>(y) / cell;
      const size_t y0 = static_cast<size_t>(gy);
      const double fy = gy - y0;
      for (size_t x = 0; x < w; ++x) {
        const double gx = static_cast<double>(x) / cell;
        const size_t x0 = static_cast<size_t>(gx);
        const double fx = gx - x0;
        const double v = grid[y0 * gw + x0] * (1 - fy) * (1 - fx) +
                         grid[y0 * gw + x0 + 1] * (1 - fy) * fx +
                         grid[(y0 + 1) * gw + x0] * fy * (1 - fx) +
                         grid[(y0 + 1) * gw + x0 + 1] * fy * fx;
        out[y * w + x] += amplitude * v;
      }
    }
    amplitude *= 0.55;
  }
  double lo = out[0], hi = out[0];
  for (double v : out) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi - lo;
  if (span > 0.0) {
    for (double& v : out) v = (v - lo) / span;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Individual corruption kinds. Each takes one scalar `t`, monotone: t = 0 is
// (close to) the identity, larger is stronger.
// ---------------------------------------------------------------------------

NdArray GaussianNoise(const NdArray& img, double t, Rng& rng) {
  NdArray out = img;
  for (double& v : out.data) v = Clip01(v + t * rng.Normal());
  return out;
}

NdArray ShotNoise(const NdArray& img, double t, Rng& rng) {
  if (t <= 0.0) return img;
  const double lambda = 1.0 / t;
  NdArray out = img;
  for (double& v : out.data) {
    v = Clip01(static_cast<double>(rng.Poisson(v * lambda)) / lambda);
  }
  return out;
}

NdArray ImpulseNoise(const NdArray& img, double t, Rng& rng) {
  NdArray out = img;
  for (double& v : out.data) {
    const double u = rng.Uniform();
    if (u < 0.5 * t) {
      v = 0.0;
    } else if (u < t) {
      v = 1.0;
    }
  }
  return out;
}

NdArray DefocusBlur(const NdArray& img, double t) {
  if (t <= 0.05) return img;
  const int r = static_cast<int>(std::ceil(t));
  const size_t k = 2 * r + 1;
  std::vector<double> kernel(k * k, 0.0);
  double sum = 0.0;
  // 4x4 supersampled disk coverage.
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      int hits = 0;
      for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
          const double py = y - 0.375 + 0.25 * sy;
          const double px = x - 0.375 + 0.25 * sx;
          if (py * py + px * px <= t * t) ++hits;
        }
      }
      kernel[(y + r) * k + (x + r)] = hits / 16.0;
      sum += hits / 16.0;
    }
  }
  if (sum <= 0.0) return img;
  for (double& v : kernel) v /= sum;
  return Convolve2d(img, kernel, k, k);
}

NdArray GlassBlur(const NdArray& img, double t, Rng& rng) {
  if (t <= 0.0) return img;
  const Dims d = ImageDims(img);
  NdArray cur = img;
  for (int pass = 0; pass < 2; ++pass) {
    NdArray next(img.shape);
    for (size_t y = 0; y < d.h; ++y) {
      for (size_t x = 0; x < d.w; ++x) {
        const double dy = rng.Uniform(-t, t);
        const double dx = rng.Uniform(-t, t);
        for (size_t c = 0; c < d.c; ++c) {
          next[(y * d.w + x) * d.c + c] =
              SampleClamped(cur, d, y + dy, x + dx, c);
        }
      }
    }
    cur = std::move(next);
  }
  for (double& v : cur.data) v = Clip01(v);
  return cur;
}

NdArray MotionBlur(const NdArray& img, double t, Rng& rng) {
  const double angle = rng.Uniform(0.0, kPi);
  if (t <= 0.5) return img;
  const int r = static_cast<int>(std::ceil(0.5 * t));
  const size_t k = 2 * r + 1;
  std::vector<double> kernel(k * k, 0.0);
  const int samples = std::max<int>(64, 16 * static_cast<int>(k));
  const double cx = std::cos(angle), cy = std::sin(angle);
  for (int i = 0; i < samples; ++i) {
    const double s = (static_cast<double>(i) / (samples - 1) - 0.5) * t;
    const double py = s * cy + r, px = s * cx + r;
    const long y0 = static_cast<long>(std::floor(py));
    const long x0 = static_cast<long>(std::floor(px));
    const double fy = py - y0, fx = px - x0;
    auto splat = [&](long yy, long xx, double wgt) {
      if (yy < 0 || xx < 0 || yy >= static_cast<long>(k) ||
          xx >= static_cast<long>(k)) {
        return;
      }
      kernel[yy * k + xx] += wgt;
    };
    splat(y0, x0, (1 - fy) * (1 - fx));
    splat(y0, x0 + 1, (1 - fy) * fx);
    splat(y0 + 1, x0, fy * (1 - fx));
    splat(y0 + 1, x0 + 1, fy * fx);
  }
  double sum = 0.0;
  for (double v : kernel) sum += v;
  for (double& v : kernel) v /= sum;
  return Convolve2d(img, kernel, k, k);
}

NdArray ZoomBlur(const NdArray& img, double t) {
  if (t <= 0.0) return img;
  const Dims d = ImageDims(img);
  const int layers = std::max(2, static_cast<int>(std::round(t / 0.02)) + 1);
  NdArray acc(img.shape);
  const double cy = (d.h - 1) * 0.5, cx = (d.w - 1) * 0.5;
  for (int i = 0; i < layers; ++i) {
    const double factor = 1.0 + t * i / (layers - 1);
    for (size_t y = 0; y < d.h; ++y) {
      for (size_t x = 0; x < d.w; ++x) {
        const double sy = cy + (y - cy) / factor;
        const double sx = cx + (x - cx) / factor;
        for (size_t c = 0; c < d.c; ++c) {
          acc[(y * d.w + x) * d.c + c] += SampleClamped(img, d, sy, sx, c);
        }
      }
    }
  }
  for (double& v : acc.data) v = Clip01(v / layers);
  return acc;
}

NdArray Snow(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  std::vector<double> noise = FractalNoise(d.h, d.w, rng);
  const double angle = rng.Uniform(kPi / 3.0, 2.0 * kPi / 3.0);
  if (t <= 0.0) return img;
  // Threshold the noise into flakes, then streak along the fall direction.
  const double threshold = std::max(0.0, 1.0 - 0.22 * t);
  std::vector<double> mask(d.h * d.w);
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = std::clamp((noise[i] - threshold) / 0.12, 0.0, 1.0);
  }
  const double streak = 1.5 + 1.2 * t;
  std::vector<double> streaked(d.h * d.w, 0.0);
  const int steps = std::max(3, static_cast<int>(std::round(streak * 2)));
  const double cy = std::sin(angle), cx = std::cos(angle);
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      double acc = 0.0;
      for (int s = 0; s < steps; ++s) {
        const double f = (static_cast<double>(s) / (steps - 1) - 0.5) * streak;
        const long yy = std::clamp<long>(
            static_cast<long>(std::lround(y + f * cy)), 0,
            static_cast<long>(d.h) - 1);
        const long xx = std::clamp<long>(
            static_cast<long>(std::lround(x + f * cx)), 0,
            static_cast<long>(d.w) - 1);
        acc += mask[yy * d.w + xx];
      }
      streaked[y * d.w + x] = std::min(1.0, acc / std::sqrt(3.0));
    }
  }
  const double opacity = std::min(1.0, 0.5 + 0.18 * t);
  NdArray out = img;
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      const double m = streaked[y * d.w + x] * opacity;
      for (size_t c = 0; c < d.c; ++c) {
        double& v = out[(y * d.w + x) * d.c + c];
        v = Clip01(v * (1.0 - m) + 0.95 * m);
      }
    }
  }
  return out;
}

NdArray Frost(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  std::vector<double> noise = FractalNoise(d.h, d.w, rng);
  if (t <= 0.0) return img;
  const double opacity = std::min(1.0, 0.40 * t);
  NdArray out = img;
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      // Sharpen the noise into crystalline patches.
      const double g = std::pow(noise[y * d.w + x], 1.5);
      const double m = opacity * g;
      for (size_t c = 0; c < d.c; ++c) {
        double& v = out[(y * d.w + x) * d.c + c];
        v = Clip01(v * (1.0 - m) + 0.85 * m);
      }
    }
  }
  return out;
}

NdArray Fog(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  std::vector<double> plasma = FractalNoise(d.h, d.w, rng);
  if (t <= 0.0) return img;
  NdArray out = img;
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      const double w =
          std::clamp(t * (0.30 + 0.45 * plasma[y * d.w + x]), 0.0, 0.97);
      for (size_t c = 0; c < d.c; ++c) {
        double& v = out[(y * d.w + x) * d.c + c];
        v = Clip01(v * (1.0 - w) + w);
      }
    }
  }
  return out;
}

NdArray Brightness(const NdArray& img, double t) {
  NdArray out = img;
  for (double& v : out.data) v = Clip01(v + t);
  return out;
}

NdArray Contrast(const NdArray& img, double t) {
  const Dims d = ImageDims(img);
  NdArray out = img;
  const double scale = 1.0 - std::clamp(t, 0.0, 0.99);
  for (size_t c = 0; c < d.c; ++c) {
    double mean = 0.0;
    for (size_t p = 0; p < d.h * d.w; ++p) mean += img[p * d.c + c];
    mean /= static_cast<double>(d.h * d.w);
    for (size_t p = 0; p < d.h * d.w; ++p) {
      out[p * d.c + c] = Clip01((img[p * d.c + c] - mean) * scale + mean);
    }
  }
  return out;
}

NdArray Elastic(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  std::vector<double> fy(d.h * d.w), fx(d.h * d.w);
  for (double& v : fy) v = rng.Uniform(-1.0, 1.0);
  for (double& v : fx) v = rng.Uniform(-1.0, 1.0);
  if (t <= 0.0) return img;
  GaussBlurField(fy, d.h, d.w, 4.0);
  GaussBlurField(fx, d.h, d.w, 4.0);
  double peak = 0.0;
  for (size_t i = 0; i < fy.size(); ++i) {
    peak = std::max({peak, std::abs(fy[i]), std::abs(fx[i])});
  }
  const double scale = peak > 0.0 ? t / peak : 0.0;
  NdArray out(img.shape);
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      const double sy = y + scale * fy[y * d.w + x];
      const double sx = x + scale * fx[y * d.w + x];
      for (size_t c = 0; c < d.c; ++c) {
        out[(y * d.w + x) * d.c + c] =
            Clip01(SampleClamped(img, d, sy, sx, c));
      }
    }
  }
  return out;
}

NdArray PixelateBlock(const NdArray& img, const Dims& d, size_t block) {
  if (block <= 1) return img;
  NdArray out(img.shape);
  for (size_t by = 0; by < d.h; by += block) {
    for (size_t bx = 0; bx < d.w; bx += block) {
      const size_t ey = std::min(d.h, by + block);
      const size_t ex = std::min(d.w, bx + block);
      for (size_t c = 0; c < d.c; ++c) {
        double mean = 0.0;
        for (size_t y = by; y < ey; ++y) {
          for (size_t x = bx; x < ex; ++x) mean += img[(y * d.w + x) * d.c + c];
        }
        mean /= static_cast<double>((ey - by) * (ex - bx));
        for (size_t y = by; y < ey; ++y) {
          for (size_t x = bx; x < ex; ++x) out[(y * d.w + x) * d.c + c] = mean;
        }
      }
    }
  }
  return out;
}

NdArray Pixelate(const NdArray& img, double t) {
  if (t <= 0.0) return img;
  const Dims d = ImageDims(img);
  const double size = 1.0 + t;
  const size_t b1 = static_cast<size_t>(std::floor(size));
  const double frac = size - static_cast<double>(b1);
  const NdArray low = PixelateBlock(img, d, b1);
  if (frac == 0.0) return low;
  const NdArray high = PixelateBlock(img, d, b1 + 1);
  NdArray out(img.shape);
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - frac) * low[i] + frac * high[i];
  }
  return out;
}

NdArray Occlusion(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  const size_t side = std::min<size_t>(
      {static_cast<size_t>(std::lround(std::max(0.0, t))), d.h, d.w});
  if (side == 0) return img;
  const size_t y0 = rng.UniformInt(d.h - side + 1);
  const size_t x0 = rng.UniformInt(d.w - side + 1);
  NdArray out = img;
  for (size_t y = y0; y < y0 + side; ++y) {
    for (size_t x = x0; x < x0 + side; ++x) {
      for (size_t c = 0; c < d.c; ++c) out[(y * d.w + x) * d.c + c] = 0.5;
    }
  }
  return out;
}

NdArray ColorDistortion(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  const size_t channel = rng.UniformInt(d.c);
  NdArray out = img;
  for (size_t p = 0; p < d.h * d.w; ++p) {
    out[p * d.c + channel] = Clip01(out[p * d.c + channel] + t);
  }
  return out;
}

NdArray Translation(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  const double angle = rng.Uniform(0.0, 2.0 * kPi);
  if (t <= 0.0) return img;
  const double dy = t * std::sin(angle), dx = t * std::cos(angle);
  NdArray out(img.shape);
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      for (size_t c = 0; c < d.c; ++c) {
        out[(y * d.w + x) * d.c + c] =
            SampleZeroFill(img, d, y - dy, x - dx, c);
      }
    }
  }
  return out;
}

NdArray Rotation(const NdArray& img, double t, Rng& rng) {
  const Dims d = ImageDims(img);
  const double sign = rng.UniformInt(2) == 0 ? 1.0 : -1.0;
  if (t <= 0.0) return img;
  const double theta = sign * t * kPi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cy = (d.h - 1) * 0.5, cx = (d.w - 1) * 0.5;
  NdArray out(img.shape);
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      const double ry = y - cy, rx = x - cx;
      const double sy = cy + ct * ry - st * rx;
      const double sx = cx + st * ry + ct * rx;
      for (size_t c = 0; c < d.c; ++c) {
        out[(y * d.w + x) * d.c + c] = SampleZeroFill(img, d, sy, sx, c);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JPEG round trip.
// ---------------------------------------------------------------------------

const int kLumaQuant[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

const int kChromaQuant[64] = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

void ScaledQuantTable(const int* base, int quality, double* out) {
  const int s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  for (int i = 0; i < 64; ++i) {
    out[i] = std::clamp((base[i] * s + 50) / 100, 1, 255);
  }
}

void Dct8x8(const double* in, double* out) {
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          acc += in[y * 8 + x] * std::cos((2 * y + 1) * u * kPi / 16.0) *
                 std::cos((2 * x + 1) * v * kPi / 16.0);
        }
      }
      const double cu = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
      const double cv = v == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
      out[u * 8 + v] = 0.25 * cu * cv * acc;
    }
  }
}

void Idct8x8(const double* in, double* out) {
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int u = 0; u < 8; ++u) {
        for (int v = 0; v < 8; ++v) {
          const double cu = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
          const double cv = v == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
          acc += cu * cv * in[u * 8 + v] *
                 std::cos((2 * y + 1) * u * kPi / 16.0) *
                 std::cos((2 * x + 1) * v * kPi / 16.0);
        }
      }
      out[y * 8 + x] = 0.25 * acc;
    }
  }
}

}  // namespace

NdArray JpegRoundtrip(const NdArray& image, int quality) {
  const Dims d = ImageDims(image);
  if (d.c != 3) {
    throw ShapeError("jpeg roundtrip expects a 3-channel image, got " +
                     ShapeToString(image.shape));
  }
  quality = std::clamp(quality, 1, 100);
  double luma_q[64], chroma_q[64];
  ScaledQuantTable(kLumaQuant, quality, luma_q);
  ScaledQuantTable(kChromaQuant, quality, chroma_q);

  const size_t ph = (d.h + 7) / 8 * 8, pw = (d.w + 7) / 8 * 8;
  // Planes: Y, Cb, Cr in [-128, 127]-ish units.
  std::vector<double> planes[3];
  for (auto& p : planes) p.assign(ph * pw, 0.0);
  for (size_t y = 0; y < ph; ++y) {
    for (size_t x = 0; x < pw; ++x) {
      const size_t sy = std::min(y, d.h - 1), sx = std::min(x, d.w - 1);
      const double r = image[(sy * d.w + sx) * 3 + 0] * 255.0;
      const double g = image[(sy * d.w + sx) * 3 + 1] * 255.0;
      const double b = image[(sy * d.w + sx) * 3 + 2] * 255.0;
      planes[0][y * pw + x] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
      planes[1][y * pw + x] = -0.168736 * r - 0.331264 * g + 0.5 * b;
      planes[2][y * pw + x] = 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }

  double block[64], coef[64];
  for (int p = 0; p < 3; ++p) {
    const double* q = p == 0 ? luma_q : chroma_q;
    for (size_t by = 0; by < ph; by += 8) {
      for (size_t bx = 0; bx < pw; bx += 8) {
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            block[y * 8 + x] = planes[p][(by + y) * pw + bx + x];
          }
        }
        Dct8x8(block, coef);
        for (int i = 0; i < 64; ++i) {
          coef[i] = std::round(coef[i] / q[i]) * q[i];
        }
        Idct8x8(coef, block);
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            planes[p][(by + y) * pw + bx + x] = block[y * 8 + x];
          }
        }
      }
    }
  }

  NdArray out(image.shape);
  for (size_t y = 0; y < d.h; ++y) {
    for (size_t x = 0; x < d.w; ++x) {
      const double yy = planes[0][y * pw + x] + 128.0;
      const double cb = planes[1][y * pw + x];
      const double cr = planes[2][y * pw + x];
      out[(y * d.w + x) * 3 + 0] = Clip01((yy + 1.402 * cr) / 255.0);
      out[(y * d.w + x) * 3 + 1] =
          Clip01((yy - 0.344136 * cb - 0.714136 * cr) / 255.0);
      out[(y * d.w + x) * 3 + 2] = Clip01((yy + 1.772 * cb) / 255.0);
    }
  }
  return out;
}

const char* CorruptionName(CorruptionKind kind) {
  static const char* kNames[kNumCorruptions] = {
      "gaussian_noise", "shot_noise", "impulse_noise", "defocus_blur",
      "glass_blur",     "motion_blur", "zoom_blur",    "snow",
      "frost",          "fog",         "brightness",   "contrast",
      "elastic",        "pixelate",    "jpeg",         "occlusion",
      "color_distortion", "translation", "rotation"};
  return kNames[static_cast<int>(kind)];
}

CorruptionKind CorruptionFromName(const std::string& name) {
  for (int i = 0; i < kNumCorruptions; ++i) {
    if (name == CorruptionName(static_cast<CorruptionKind>(i))) {
      return static_cast<CorruptionKind>(i);
    }
  }
  throw ConfigError("unknown corruption kind: " + name);
}

SeverityTable SeverityTable::Desk32Default() {
  SeverityTable t;
  auto set = [&](CorruptionKind k, std::array<double, 5> v) {
    t.params[static_cast<int>(k)] = v;
  };
  set(CorruptionKind::kGaussianNoise, {0.08, 0.13, 0.20, 0.29, 0.38});
  set(CorruptionKind::kShotNoise, {0.017, 0.04, 0.08, 0.15, 0.30});
  set(CorruptionKind::kImpulseNoise, {0.03, 0.07, 0.12, 0.19, 0.27});
  set(CorruptionKind::kDefocusBlur, {0.8, 1.2, 1.7, 2.3, 3.0});
  set(CorruptionKind::kGlassBlur, {0.5, 0.9, 1.4, 2.0, 2.8});
  set(CorruptionKind::kMotionBlur, {2.0, 3.5, 5.0, 7.0, 9.0});
  set(CorruptionKind::kZoomBlur, {0.06, 0.11, 0.17, 0.24, 0.32});
  set(CorruptionKind::kSnow, {0.3, 0.55, 0.8, 1.1, 1.4});
  set(CorruptionKind::kFrost, {0.35, 0.6, 0.85, 1.1, 1.35});
  set(CorruptionKind::kFog, {0.4, 0.7, 1.0, 1.3, 1.6});
  set(CorruptionKind::kBrightness, {0.1, 0.2, 0.3, 0.4, 0.5});
  set(CorruptionKind::kContrast, {0.35, 0.5, 0.65, 0.8, 0.9});
  set(CorruptionKind::kElastic, {1.0, 1.8, 2.7, 3.7, 5.0});
  set(CorruptionKind::kPixelate, {1.0, 2.0, 3.0, 4.5, 6.0});
  set(CorruptionKind::kJpeg, {75, 82, 88, 93, 97});
  // Desk-resolution scaling of the reference pixel ranges (x32/224):
  // occlusion 60..127 px -> 9..18, translation 15..62 px -> 2..9;
  // rotation degrees and the color fraction carry over unchanged.
  set(CorruptionKind::kOcclusion, {9, 11.25, 13.5, 15.75, 18});
  set(CorruptionKind::kColorDistortion, {0.08, 0.135, 0.19, 0.245, 0.30});
  set(CorruptionKind::kTranslation, {2, 3.75, 5.5, 7.25, 9});
  set(CorruptionKind::kRotation, {8, 16, 24, 32, 40});
  return t;
}

SeverityTable SeverityTable::FromBounds(
    const std::array<std::pair<double, double>, kNumCorruptions>& bounds) {
  SeverityTable t;
  for (int k = 0; k < kNumCorruptions; ++k) {
    for (int s = 0; s < 5; ++s) {
      t.params[k][s] =
          bounds[k].first + (bounds[k].second - bounds[k].first) * s / 4.0;
    }
  }
  return t;
}

void SeverityTable::SetBounds(CorruptionKind kind, double low, double high) {
  for (int s = 0; s < 5; ++s) {
    params[static_cast<int>(kind)][s] = low + (high - low) * s / 4.0;
  }
}

double StrengthRangeMax(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise: return 0.8;
    case CorruptionKind::kShotNoise: return 0.5;
    case CorruptionKind::kImpulseNoise: return 0.6;
    case CorruptionKind::kDefocusBlur: return 5.0;
    case CorruptionKind::kGlassBlur: return 5.0;
    case CorruptionKind::kMotionBlur: return 14.0;
    case CorruptionKind::kZoomBlur: return 0.8;
    case CorruptionKind::kSnow: return 2.4;
    case CorruptionKind::kFrost: return 2.4;
    case CorruptionKind::kFog: return 2.5;
    case CorruptionKind::kBrightness: return 0.85;
    case CorruptionKind::kContrast: return 0.97;
    case CorruptionKind::kElastic: return 9.0;
    case CorruptionKind::kPixelate: return 10.0;
    case CorruptionKind::kJpeg: return 99.0;
    case CorruptionKind::kOcclusion: return 24.0;
    case CorruptionKind::kColorDistortion: return 0.7;
    case CorruptionKind::kTranslation: return 18.0;
    case CorruptionKind::kRotation: return 70.0;
  }
  return 1.0;
}

NdArray ApplyCorruptionParam(CorruptionKind kind, double strength,
                             const NdArray& image, uint64_t seed) {
  Rng rng(seed);
  switch (kind) {
    case CorruptionKind::kGaussianNoise: return GaussianNoise(image, strength, rng);
    case CorruptionKind::kShotNoise: return ShotNoise(image, strength, rng);
    case CorruptionKind::kImpulseNoise: return ImpulseNoise(image, strength, rng);
    case CorruptionKind::kDefocusBlur: return DefocusBlur(image, strength);
    case CorruptionKind::kGlassBlur: return GlassBlur(image, strength, rng);
    case CorruptionKind::kMotionBlur: return MotionBlur(image, strength, rng);
    case CorruptionKind::kZoomBlur: return ZoomBlur(image, strength);
    case CorruptionKind::kSnow: return Snow(image, strength, rng);
    case CorruptionKind::kFrost: return Frost(image, strength, rng);
    case CorruptionKind::kFog: return Fog(image, strength, rng);
    case CorruptionKind::kBrightness: return Brightness(image, strength);
    case CorruptionKind::kContrast: return Contrast(image, strength);
    case CorruptionKind::kElastic: return Elastic(image, strength, rng);
    case CorruptionKind::kPixelate: return Pixelate(image, strength);
    case CorruptionKind::kJpeg:
      return JpegRoundtrip(image,
                           100 - static_cast<int>(std::lround(strength)));
    case CorruptionKind::kOcclusion: return Occlusion(image, strength, rng);
    case CorruptionKind::kColorDistortion:
      return ColorDistortion(image, strength, rng);
    case CorruptionKind::kTranslation: return Translation(image, strength, rng);
    case CorruptionKind::kRotation: return Rotation(image, strength, rng);
  }
  throw ConfigError("unknown corruption kind id");
}

NdArray ApplyCorruption(CorruptionKind kind, int severity,
                        const NdArray& image, uint64_t seed,
                        const SeverityTable& table) {
  if (severity < 1 || severity > 5) {
    throw ConfigError("severity must be in 1..5, got " +
                      std::to_string(severity));
  }
  const double strength = table.params[static_cast<int>(kind)][severity - 1];
  const uint64_t sub = DeriveSeed(
      seed, std::string(CorruptionName(kind)) + "/" + std::to_string(severity));
  return ApplyCorruptionParam(kind, strength, image, sub);
}

CalibrationResult CalibrateSeverity(CorruptionKind kind,
                                    const ModelParams& reference,
                                    const Dataset::Split& test,
                                    uint64_t seed) {
  if (test.size() == 0) throw DataError("calibration needs a test split");

  auto accuracy_at = [&](double strength) {
    std::vector<NdArray> corrupted(test.size());
    for (size_t i = 0; i < test.size(); ++i) {
      corrupted[i] = ApplyCorruptionParam(
          kind, strength, test.images[i],
          DeriveSeed(seed, std::string("calibrate/") + CorruptionName(kind) +
                               "/" + std::to_string(i)));
    }
    return 100.0 * CountCorrect(reference, corrupted, test.labels) /
           static_cast<double>(test.size());
  };

  const double clean =
      100.0 * CountCorrect(reference, test.images, test.labels) /
      static_cast<double>(test.size());
  const double hi = StrengthRangeMax(kind);
  const double floor_acc = accuracy_at(hi);
  if (clean - floor_acc < 29.0) {
    throw ContractError(
        std::string("calibration: ") + CorruptionName(kind) +
        " cannot reach a 30-point drop; max achievable drop is " +
        std::to_string(clean - floor_acc) + " points");
  }

  auto search = [&](double target_drop) {
    double lo = 0.0, up = hi;
    double best_param = hi, best_err = 1e9, best_drop = 0.0;
    for (int it = 0; it < 11; ++it) {
      const double mid = 0.5 * (lo + up);
      const double drop = clean - accuracy_at(mid);
      const double err = std::abs(drop - target_drop);
      if (err < best_err) {
        best_err = err;
        best_param = mid;
        best_drop = drop;
      }
      if (drop < target_drop) {
        lo = mid;
      } else {
        up = mid;
      }
    }
    return std::pair<double, double>(best_param, best_drop);
  };

  CalibrationResult res;
  res.clean_accuracy = clean;
  const auto low = search(5.0);
  const auto high = search(30.0);
  res.low = low.first;
  res.low_drop = low.second;
  res.high = high.first;
  res.high_drop = high.second;
  return res;
}

}  // namespace mtlat
