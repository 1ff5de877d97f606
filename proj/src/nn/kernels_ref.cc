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

#include <cstring>

#include "comix/nn/kernels.h"

namespace comix::nn::kernels::reference {

void Gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, const double* b,
          double* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) {
        double av = trans_a ? a[static_cast<size_t>(p) * m + i] : a[static_cast<size_t>(i) * k + p];
        double bv = trans_b ? b[static_cast<size_t>(j) * k + p] : b[static_cast<size_t>(p) * n + j];
        s += av * bv;
      }
      double& out = c[static_cast<size_t>(i) * n + j];
      out = accumulate ? out + s : s;
    }
  }
}

void Im2Col(const double* x, int batch, int length, int channels, int kernel, int dilation,
            double* cols) {
  const int pad = dilation * (kernel - 1) / 2;
  const int width = channels * kernel;
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < length; ++t) {
      for (int ci = 0; ci < channels; ++ci) {
        for (int kk = 0; kk < kernel; ++kk) {
          const int src = t + kk * dilation - pad;
          double v = 0.0;
          if (src >= 0 && src < length) v = x[(static_cast<size_t>(b) * length + src) * channels + ci];
          cols[(static_cast<size_t>(b) * length + t) * width + ci * kernel + kk] = v;
        }
      }
    }
  }
}

void Col2Im(const double* cols, int batch, int length, int channels, int kernel, int dilation,
            double* dx) {
  const int pad = dilation * (kernel - 1) / 2;
  const int width = channels * kernel;
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < length; ++t) {
      for (int ci = 0; ci < channels; ++ci) {
        for (int kk = 0; kk < kernel; ++kk) {
          const int src = t + kk * dilation - pad;
          if (src < 0 || src >= length) continue;
          dx[(static_cast<size_t>(b) * length + src) * channels + ci] +=
              cols[(static_cast<size_t>(b) * length + t) * width + ci * kernel + kk];
        }
      }
    }
  }
}

void ScatterFrames(const double* p, int frames, int kernel, int cout, int stride, double* out) {
  for (int t = 0; t < frames; ++t) {
    for (int kk = 0; kk < kernel; ++kk) {
      for (int co = 0; co < cout; ++co) {
        out[(static_cast<size_t>(t) * stride + kk) * cout + co] +=
            p[(static_cast<size_t>(t) * kernel + kk) * cout + co];
      }
    }
  }
}

void GatherFrames(const double* dout, int frames, int kernel, int cout, int stride, double* dp) {
  for (int t = 0; t < frames; ++t) {
    for (int kk = 0; kk < kernel; ++kk) {
      for (int co = 0; co < cout; ++co) {
        dp[(static_cast<size_t>(t) * kernel + kk) * cout + co] =
            dout[(static_cast<size_t>(t) * stride + kk) * cout + co];
      }
    }
  }
}

}  // namespace comix::nn::kernels::reference
