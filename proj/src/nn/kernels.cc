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

#include "comix/nn/kernels.h"

#include <algorithm>
#include <atomic>
#include <cstring>

namespace comix::nn::kernels {

namespace {

std::atomic<bool> g_use_reference{false};

constexpr int kColumnBlock = 256;
constexpr long kParallelWork = 1L << 15;

}  // namespace

void SetUseReference(bool use_reference) { g_use_reference = use_reference; }
bool UseReference() { return g_use_reference; }

void Gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b,
          double* c, bool accumulate) {
  if (g_use_reference) {
    reference::Gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
    return;
  }
  const long work = static_cast<long>(m) * n * k;
  if (!accumulate) std::memset(c, 0, sizeof(double) * static_cast<size_t>(m) * n);
  if (!trans_b) {
    // Rows of C are independent; block columns so a slab of B stays in cache.
    for (int j0 = 0; j0 < n; j0 += kColumnBlock) {
      const int j1 = std::min(n, j0 + kColumnBlock);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
      for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
          const double av = trans_a ? a[static_cast<size_t>(p) * m + i] : a[static_cast<size_t>(i) * k + p];
          const double* bp = b + static_cast<size_t>(p) * n;
#pragma omp simd
          for (int j = j0; j < j1; ++j) ci[j] += av * bp[j];
        }
      }
    }
    return;
  }
  // op(B) = B^T with B stored [n x k]: dot products against rows of B.
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<size_t>(i) * n;
    if (!trans_a) {
      const double* ai = a + static_cast<size_t>(i) * k;
      for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<size_t>(j) * k;
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] += s;
      }
    } else {
      for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<size_t>(j) * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += a[static_cast<size_t>(p) * m + i] * bj[p];
        ci[j] += s;
      }
    }
  }
}

void Im2Col(const double* x, int batch, int length, int channels, int kernel, int dilation,
            double* cols) {
  if (g_use_reference) {
    reference::Im2Col(x, batch, length, channels, kernel, dilation, cols);
    return;
  }
  const int pad = dilation * (kernel - 1) / 2;
  const int width = channels * kernel;
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<long>(batch) * length * width > kParallelWork)
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < length; ++t) {
      double* row = cols + (static_cast<size_t>(b) * length + t) * width;
      for (int kk = 0; kk < kernel; ++kk) {
        const int src = t + kk * dilation - pad;
        if (src < 0 || src >= length) {
          for (int ci = 0; ci < channels; ++ci) row[ci * kernel + kk] = 0.0;
        } else {
          const double* xr = x + (static_cast<size_t>(b) * length + src) * channels;
          for (int ci = 0; ci < channels; ++ci) row[ci * kernel + kk] = xr[ci];
        }
      }
    }
  }
}

void Col2Im(const double* cols, int batch, int length, int channels, int kernel, int dilation,
            double* dx) {
  if (g_use_reference) {
    reference::Col2Im(cols, batch, length, channels, kernel, dilation, dx);
    return;
  }
  const int pad = dilation * (kernel - 1) / 2;
  const int width = channels * kernel;
  // Gather form: each output position sums its own contributions, so
  // threads never write the same element.
#pragma omp parallel for collapse(2) schedule(static) if (static_cast<long>(batch) * length * width > kParallelWork)
  for (int b = 0; b < batch; ++b) {
    for (int s = 0; s < length; ++s) {
      double* dxr = dx + (static_cast<size_t>(b) * length + s) * channels;
      for (int kk = 0; kk < kernel; ++kk) {
        const int t = s - kk * dilation + pad;
        if (t < 0 || t >= length) continue;
        const double* row = cols + (static_cast<size_t>(b) * length + t) * width;
        for (int ci = 0; ci < channels; ++ci) dxr[ci] += row[ci * kernel + kk];
      }
    }
  }
}

void ScatterFrames(const double* p, int frames, int kernel, int cout, int stride, double* out) {
  if (g_use_reference) {
    reference::ScatterFrames(p, frames, kernel, cout, stride, out);
    return;
  }
  const int rows = (frames - 1) * stride + kernel;
#pragma omp parallel for schedule(static) if (static_cast<long>(rows) * cout > kParallelWork)
  for (int r = 0; r < rows; ++r) {
    double* o = out + static_cast<size_t>(r) * cout;
    const int t_hi = std::min(frames - 1, r / stride);
    for (int t = t_hi; t >= 0; --t) {
      const int kk = r - t * stride;
      if (kk >= kernel) break;
      const double* src = p + (static_cast<size_t>(t) * kernel + kk) * cout;
#pragma omp simd
      for (int co = 0; co < cout; ++co) o[co] += src[co];
    }
  }
}

void GatherFrames(const double* dout, int frames, int kernel, int cout, int stride, double* dp) {
  if (g_use_reference) {
    reference::GatherFrames(dout, frames, kernel, cout, stride, dp);
    return;
  }
#pragma omp parallel for schedule(static) if (static_cast<long>(frames) * kernel * cout > kParallelWork)
  for (int t = 0; t < frames; ++t) {
    std::memcpy(dp + static_cast<size_t>(t) * kernel * cout,
                dout + static_cast<size_t>(t) * stride * cout,
                sizeof(double) * static_cast<size_t>(kernel) * cout);
  }
}

}  // namespace comix::nn::kernels
