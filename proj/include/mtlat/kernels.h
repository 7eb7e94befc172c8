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

#ifndef MTLAT_KERNELS_H_
#define MTLAT_KERNELS_H_

#include <cstddef>

namespace mtlat {
namespace kernels {

// Thread count used by the OpenMP kernels. 1 (the default) runs everything
// serially. Parallel results are bit-identical to the serial references for
// any thread count: every output element is accumulated by exactly one
// thread, in the same index order as the reference.
void SetThreads(int n);
int GetThreads();

// C[m,n] = A[m,k] * B[k,n]
void MatMulSerial(const double* a, const double* b, double* c, size_t m,
                  size_t k, size_t n);
void MatMul(const double* a, const double* b, double* c, size_t m, size_t k,
            size_t n);

// C[k,n] = A[m,k]^T * B[m,n]
void MatMulTransASerial(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n);
void MatMulTransA(const double* a, const double* b, double* c, size_t m,
                  size_t k, size_t n);

// C[m,k] = A[m,n] * B[k,n]^T
void MatMulTransBSerial(const double* a, const double* b, double* c, size_t m,
                        size_t k, size_t n);
void MatMulTransB(const double* a, const double* b, double* c, size_t m,
                  size_t k, size_t n);

// Patch extraction for stride-1, zero-padded convolution.
// x: [batch, h, w, c] row-major; cols: [batch*oh*ow, kh*kw*c] with
// oh = h + 2*pad - kh + 1, ow likewise.
void Im2ColSerial(const double* x, size_t batch, size_t h, size_t w, size_t c,
                  size_t kh, size_t kw, size_t pad, double* cols);
void Im2Col(const double* x, size_t batch, size_t h, size_t w, size_t c,
            size_t kh, size_t kw, size_t pad, double* cols);

// Adjoint of Im2Col: scatters cols gradients back onto the input layout.
// Written as a gather over input pixels so it parallelizes without atomics.
void Col2ImSerial(const double* cols, size_t batch, size_t h, size_t w,
                  size_t c, size_t kh, size_t kw, size_t pad, double* dx);
void Col2Im(const double* cols, size_t batch, size_t h, size_t w, size_t c,
            size_t kh, size_t kw, size_t pad, double* dx);

void ReluForwardSerial(const double* x, double* y, size_t n);
void ReluForward(const double* x, double* y, size_t n);

// dx = dy where x > 0 else 0 (subgradient at 0 is 0).
void ReluBackwardSerial(const double* x, const double* dy, double* dx,
                        size_t n);
void ReluBackward(const double* x, const double* dy, double* dx, size_t n);

// y[r, :] = x[r, :] + b for every row; rows = leading dims collapsed.
void AddBiasSerial(const double* x, const double* b, double* y, size_t rows,
                   size_t n);
void AddBias(const double* x, const double* b, double* y, size_t rows,
             size_t n);

// db[j] = sum_r dy[r, j], accumulated in row order.
void BiasGradSerial(const double* dy, double* db, size_t rows, size_t n);
void BiasGrad(const double* dy, double* db, size_t rows, size_t n);

// 2x2 max pooling with stride 2; trailing odd row/column dropped.
// x: [batch, h, w, c] -> y: [batch, h/2, w/2, c]; argmax records the winning
// offset (0..3, row-major within the window, first maximum wins).
void MaxPool2ForwardSerial(const double* x, size_t batch, size_t h, size_t w,
                           size_t c, double* y, unsigned char* argmax);
void MaxPool2Forward(const double* x, size_t batch, size_t h, size_t w,
                     size_t c, double* y, unsigned char* argmax);

void MaxPool2BackwardSerial(const double* dy, const unsigned char* argmax,
                            size_t batch, size_t h, size_t w, size_t c,
                            double* dx);
void MaxPool2Backward(const double* dy, const unsigned char* argmax,
                      size_t batch, size_t h, size_t w, size_t c, double* dx);

}  // namespace kernels
}  // namespace mtlat

#endif  // MTLAT_KERNELS_H_
