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

#include "mtlat/kernels.h"

#include <algorithm>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtlat {
namespace kernels {

namespace {
int g_threads = 1;
}  // namespace

void SetThreads(int n) { g_threads = std::max(1, n); }
int GetThreads() { return g_threads; }

// ---------------------------------------------------------------------------
// Matrix products. The OpenMP variants split rows of the output; each output
// element keeps the reference accumulation order (ascending k), so results
// are bit-identical to the serial versions.
// ---------------------------------------------------------------------------

void MatMulSerial(const double* a, const double* b, double* c, size_t m,
                  size_t k, size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void MatMul(const double* a, const double* b, double* c, size_t m, size_t k,
            size_t n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && m > 1)
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::memset(ci, 0, n * sizeof(double));
    for (size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void MatMulTransASerial(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n) {
  std::memset(c, 0, k * n * sizeof(double));
  for (size_t p = 0; p < k; ++p) {
    double* cp = c + p * n;
    for (size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* bi = b + i * n;
      for (size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

void MatMulTransA(const double* a, const double* b, double* c, size_t m,
                  size_t k, size_t n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && k > 1)
  for (size_t p = 0; p < k; ++p) {
    double* cp = c + p * n;
    std::memset(cp, 0, n * sizeof(double));
    for (size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* bi = b + i * n;
      for (size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

void MatMulTransBSerial(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      ci[p] = acc;
    }
  }
}

void MatMulTransB(const double* a, const double* b, double* c, size_t m,
                  size_t k, size_t n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && m > 1)
  for (size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      ci[p] = acc;
    }
  }
}

// ---------------------------------------------------------------------------
// Convolution lowering.
// ---------------------------------------------------------------------------

namespace {

inline void Im2ColRow(const double* x, size_t h, size_t w, size_t c, size_t kh,
                      size_t kw, size_t pad, size_t oy, size_t ox,
                      double* row) {
  // row has kh*kw*c entries for output pixel (oy, ox).
  for (size_t ky = 0; ky < kh; ++ky) {
    const long sy = static_cast<long>(oy + ky) - static_cast<long>(pad);
    double* dst = row + ky * kw * c;
    if (sy < 0 || sy >= static_cast<long>(h)) {
      std::memset(dst, 0, kw * c * sizeof(double));
      continue;
    }
    for (size_t kx = 0; kx < kw; ++kx) {
      const long sx = static_cast<long>(ox + kx) - static_cast<long>(pad);
      if (sx < 0 || sx >= static_cast<long>(w)) {
        std::memset(dst + kx * c, 0, c * sizeof(double));
      } else {
        std::memcpy(dst + kx * c, x + (sy * w + sx) * c, c * sizeof(double));
      }
    }
  }
}

}  // namespace

void Im2ColSerial(const double* x, size_t batch, size_t h, size_t w, size_t c,
                  size_t kh, size_t kw, size_t pad, double* cols) {
  const size_t oh = h + 2 * pad - kh + 1;
  const size_t ow = w + 2 * pad - kw + 1;
  const size_t patch = kh * kw * c;
  for (size_t idx = 0; idx < batch * oh * ow; ++idx) {
    const size_t b = idx / (oh * ow);
    const size_t oy = (idx / ow) % oh;
    const size_t ox = idx % ow;
    Im2ColRow(x + b * h * w * c, h, w, c, kh, kw, pad, oy, ox,
              cols + idx * patch);
  }
}

void Im2Col(const double* x, size_t batch, size_t h, size_t w, size_t c,
            size_t kh, size_t kw, size_t pad, double* cols) {
  const size_t oh = h + 2 * pad - kh + 1;
  const size_t ow = w + 2 * pad - kw + 1;
  const size_t patch = kh * kw * c;
  const size_t total = batch * oh * ow;
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && total > 1)
  for (size_t idx = 0; idx < total; ++idx) {
    const size_t b = idx / (oh * ow);
    const size_t oy = (idx / ow) % oh;
    const size_t ox = idx % ow;
    Im2ColRow(x + b * h * w * c, h, w, c, kh, kw, pad, oy, ox,
              cols + idx * patch);
  }
}

namespace {

inline double Col2ImPixel(const double* cols, size_t h, size_t w, size_t c,
                          size_t kh, size_t kw, size_t pad, size_t oh,
                          size_t ow, size_t y, size_t x, size_t ch,
                          size_t batch_offset) {
  // Gather every cols entry that read input pixel (y, x, ch):
  // output (oy, ox) with kernel offset (ky, kx) reads y = oy + ky - pad.
  double acc = 0.0;
  const size_t patch = kh * kw * c;
  for (size_t ky = 0; ky < kh; ++ky) {
    const long oy = static_cast<long>(y + pad) - static_cast<long>(ky);
    if (oy < 0 || oy >= static_cast<long>(oh)) continue;
    for (size_t kx = 0; kx < kw; ++kx) {
      const long ox = static_cast<long>(x + pad) - static_cast<long>(kx);
      if (ox < 0 || ox >= static_cast<long>(ow)) continue;
      const size_t row = batch_offset + oy * ow + ox;
      acc += cols[row * patch + (ky * kw + kx) * c + ch];
    }
  }
  return acc;
}

}  // namespace

void Col2ImSerial(const double* cols, size_t batch, size_t h, size_t w,
                  size_t c, size_t kh, size_t kw, size_t pad, double* dx) {
  const size_t oh = h + 2 * pad - kh + 1;
  const size_t ow = w + 2 * pad - kw + 1;
  for (size_t idx = 0; idx < batch * h * w * c; ++idx) {
    const size_t b = idx / (h * w * c);
    const size_t y = (idx / (w * c)) % h;
    const size_t x = (idx / c) % w;
    const size_t ch = idx % c;
    dx[idx] = Col2ImPixel(cols, h, w, c, kh, kw, pad, oh, ow, y, x, ch,
                          b * oh * ow);
  }
}

void Col2Im(const double* cols, size_t batch, size_t h, size_t w, size_t c,
            size_t kh, size_t kw, size_t pad, double* dx) {
  const size_t oh = h + 2 * pad - kh + 1;
  const size_t ow = w + 2 * pad - kw + 1;
  const size_t total = batch * h * w * c;
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && total > 1)
  for (size_t idx = 0; idx < total; ++idx) {
    const size_t b = idx / (h * w * c);
    const size_t y = (idx / (w * c)) % h;
    const size_t x = (idx / c) % w;
    const size_t ch = idx % c;
    dx[idx] = Col2ImPixel(cols, h, w, c, kh, kw, pad, oh, ow, y, x, ch,
                          b * oh * ow);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and reduction kernels.
// ---------------------------------------------------------------------------

void ReluForwardSerial(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void ReluForward(const double* x, double* y, size_t n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && n > 4096)
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void ReluBackwardSerial(const double* x, const double* dy, double* dx,
                        size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void ReluBackward(const double* x, const double* dy, double* dx, size_t n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && n > 4096)
  for (size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void AddBiasSerial(const double* x, const double* b, double* y, size_t rows,
                   size_t n) {
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * n;
    double* yr = y + r * n;
    for (size_t j = 0; j < n; ++j) yr[j] = xr[j] + b[j];
  }
}

void AddBias(const double* x, const double* b, double* y, size_t rows,
             size_t n) {
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && rows > 1)
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * n;
    double* yr = y + r * n;
    for (size_t j = 0; j < n; ++j) yr[j] = xr[j] + b[j];
  }
}

void BiasGradSerial(const double* dy, double* db, size_t rows, size_t n) {
  std::memset(db, 0, n * sizeof(double));
  for (size_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * n;
    for (size_t j = 0; j < n; ++j) db[j] += dyr[j];
  }
}

void BiasGrad(const double* dy, double* db, size_t rows, size_t n) {
  // Parallel over columns; each column sums rows in ascending order.
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && n > 1)
  for (size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (size_t r = 0; r < rows; ++r) acc += dy[r * n + j];
    db[j] = acc;
  }
}

// ---------------------------------------------------------------------------
// 2x2 max pooling.
// ---------------------------------------------------------------------------

namespace {

inline void PoolCell(const double* x, size_t h, size_t w, size_t c, size_t py,
                     size_t px, size_t ch, double* out, unsigned char* arg) {
  const size_t y0 = 2 * py, x0 = 2 * px;
  double best = x[(y0 * w + x0) * c + ch];
  unsigned char best_i = 0;
  const size_t offs[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (unsigned char i = 1; i < 4; ++i) {
    const double v = x[((y0 + offs[i][0]) * w + (x0 + offs[i][1])) * c + ch];
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  *out = best;
  *arg = best_i;
}

}  // namespace

void MaxPool2ForwardSerial(const double* x, size_t batch, size_t h, size_t w,
                           size_t c, double* y, unsigned char* argmax) {
  const size_t ph = h / 2, pw = w / 2;
  for (size_t idx = 0; idx < batch * ph * pw * c; ++idx) {
    const size_t b = idx / (ph * pw * c);
    const size_t py = (idx / (pw * c)) % ph;
    const size_t px = (idx / c) % pw;
    const size_t ch = idx % c;
    PoolCell(x + b * h * w * c, h, w, c, py, px, ch, y + idx, argmax + idx);
  }
}

void MaxPool2Forward(const double* x, size_t batch, size_t h, size_t w,
                     size_t c, double* y, unsigned char* argmax) {
  const size_t ph = h / 2, pw = w / 2;
  const size_t total = batch * ph * pw * c;
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && total > 1)
  for (size_t idx = 0; idx < total; ++idx) {
    const size_t b = idx / (ph * pw * c);
    const size_t py = (idx / (pw * c)) % ph;
    const size_t px = (idx / c) % pw;
    const size_t ch = idx % c;
    PoolCell(x + b * h * w * c, h, w, c, py, px, ch, y + idx, argmax + idx);
  }
}

namespace {

inline double PoolBackPixel(const double* dy, const unsigned char* argmax,
                            size_t h, size_t w, size_t c, size_t y, size_t x,
                            size_t ch, size_t cell_base, size_t pw) {
  const size_t ph = h / 2;
  const size_t py = y / 2, px = x / 2;
  if (py >= ph || px >= pw) return 0.0;  // dropped odd edge
  const size_t cell = cell_base + (py * pw + px) * c + ch;
  const unsigned char winner = argmax[cell];
  const size_t wy = 2 * py + (winner >> 1), wx = 2 * px + (winner & 1);
  return (wy == y && wx == x) ? dy[cell] : 0.0;
}

}  // namespace

void MaxPool2BackwardSerial(const double* dy, const unsigned char* argmax,
                            size_t batch, size_t h, size_t w, size_t c,
                            double* dx) {
  const size_t ph = h / 2, pw = w / 2;
  for (size_t idx = 0; idx < batch * h * w * c; ++idx) {
    const size_t b = idx / (h * w * c);
    const size_t y = (idx / (w * c)) % h;
    const size_t x = (idx / c) % w;
    const size_t ch = idx % c;
    dx[idx] =
        PoolBackPixel(dy, argmax, h, w, c, y, x, ch, b * ph * pw * c, pw);
  }
}

void MaxPool2Backward(const double* dy, const unsigned char* argmax,
                      size_t batch, size_t h, size_t w, size_t c, double* dx) {
  const size_t ph = h / 2, pw = w / 2;
  const size_t total = batch * h * w * c;
#pragma omp parallel for schedule(static) num_threads(g_threads) \
    if (g_threads > 1 && total > 1)
  for (size_t idx = 0; idx < total; ++idx) {
    const size_t b = idx / (h * w * c);
    const size_t y = (idx / (w * c)) % h;
    const size_t x = (idx / c) % w;
    const size_t ch = idx % c;
    dx[idx] =
        PoolBackPixel(dy, argmax, h, w, c, y, x, ch, b * ph * pw * c, pw);
  }
}

}  // namespace kernels
}  // namespace mtlat
