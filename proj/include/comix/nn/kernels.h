// Copyright (c) 2026 The Comix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COMIX_NN_KERNELS_H_
#define COMIX_NN_KERNELS_H_

// Dense numeric kernels behind the autograd ops. The top-level namespace
// holds the OpenMP-parallel versions; `reference` holds plain serial loops
// kept as the test oracle and the benchmark baseline.

#include <cstddef>

namespace comix::nn::kernels {

// C[m x n] (+)= op(A) * op(B), row-major with leading dimensions equal to the
// logical row lengths. op(A) is [m x k]; with trans_a, A is stored [k x m].
void Gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b,
          double* c, bool accumulate);

// Unfolds x [batch, length, channels] into columns [batch*length, channels*kernel]
// (channel-major, tap-minor) for a stride-1 "same"-padded dilated convolution.
void Im2Col(const double* x, int batch, int length, int channels, int kernel, int dilation,
            double* cols);
// Adjoint of Im2Col: accumulates columns back into dx.
void Col2Im(const double* cols, int batch, int length, int channels, int kernel, int dilation,
            double* dx);

// out[(t*stride + k), co] += p[t, k*cout + co]; out has (frames-1)*stride+kernel rows.
void ScatterFrames(const double* p, int frames, int kernel, int cout, int stride, double* out);
// Adjoint of ScatterFrames.
void GatherFrames(const double* dout, int frames, int kernel, int cout, int stride, double* dp);

namespace reference {

void Gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b,
          double* c, bool accumulate);
void Im2Col(const double* x, int batch, int length, int channels, int kernel, int dilation,
            double* cols);
void Col2Im(const double* cols, int batch, int length, int channels, int kernel, int dilation,
            double* dx);
void ScatterFrames(const double* p, int frames, int kernel, int cout, int stride, double* out);
void GatherFrames(const double* dout, int frames, int kernel, int cout, int stride, double* dp);

}  // namespace reference

// Selects the serial reference path for every op (tests and benchmarks).
void SetUseReference(bool use_reference);
bool UseReference();

}  // namespace comix::nn::kernels

#endif  // COMIX_NN_KERNELS_H_
