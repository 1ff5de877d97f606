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

#include "comix/nn/autograd.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "comix/error.h"
#include "comix/nn/kernels.h"

namespace comix::nn {

namespace {

thread_local bool g_grad_enabled = true;

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(std::string(op) + ": shape mismatch " + ShapeString(a.shape()) + " vs " +
                ShapeString(b.shape()));
  }
}

// Gradient buffer of input i if that input participates in backprop.
Tensor* InGrad(Node& self, size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.GradBuffer() : nullptr;
}

const Tensor& InValue(Node& self, size_t i) { return self.inputs[i]->value; }

int LastDim(const Shape& s) { return s.empty() ? 1 : s.back(); }

}  // namespace

Tensor& Node::GradBuffer() {
  if (grad.numel() != value.numel() || grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var MakeResult(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->inputs.reserve(inputs.size());
    for (const auto& in : inputs) out.node_->inputs.push_back(in.node());
    out.node_->backward = std::move(backward);
  }
  return out;
}

void Backward(const Var& loss) {
  if (!loss.requires_grad()) return;
  if (loss.value().numel() != 1) throw Error("backward: loss must be a scalar");
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Node* root = loss.node().get();
  root->GradBuffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.numel() > 0) n->backward(*n);
  }
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var Constant(Tensor value) { return Var(std::move(value), false); }

// ---- elementwise ------------------------------------------------------------

Var Add(const Var& a, const Var& b) {
  RequireSameShape(a, b, "add");
  Tensor v = a.value();
  const double* bv = b.value().data();
  for (size_t i = 0; i < v.numel(); ++i) v[i] += bv[i];
  return MakeResult(std::move(v), {a, b}, [](Node& self) {
    for (size_t k = 0; k < 2; ++k) {
      if (Tensor* g = InGrad(self, k)) {
        for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var Sub(const Var& a, const Var& b) {
  RequireSameShape(a, b, "sub");
  Tensor v = a.value();
  const double* bv = b.value().data();
  for (size_t i = 0; i < v.numel(); ++i) v[i] -= bv[i];
  return MakeResult(std::move(v), {a, b}, [](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = InGrad(self, 1)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var Mul(const Var& a, const Var& b) {
  RequireSameShape(a, b, "mul");
  Tensor v = a.value();
  const double* bv = b.value().data();
  for (size_t i = 0; i < v.numel(); ++i) v[i] *= bv[i];
  return MakeResult(std::move(v), {a, b}, [](Node& self) {
    const Tensor& av = InValue(self, 0);
    const Tensor& bv = InValue(self, 1);
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = InGrad(self, 1)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var Scale(const Var& a, double s) {
  Tensor v = a.value();
  for (double& x : v.vec()) x *= s;
  return MakeResult(std::move(v), {a}, [s](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += s * self.grad[i];
    }
  });
}

Var AddScalar(const Var& a, double s) {
  Tensor v = a.value();
  for (double& x : v.vec()) x += s;
  return MakeResult(std::move(v), {a}, [](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

namespace {

// Elementwise unary op whose derivative is a function of (input, output).
template <class F, class D>
Var Unary(const Var& a, F f, D dfdx) {
  Tensor v = a.value();
  for (double& x : v.vec()) x = f(x);
  return MakeResult(std::move(v), {a}, [dfdx](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      const Tensor& x = InValue(self, 0);
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * dfdx(x[i], self.value[i]);
    }
  });
}

}  // namespace

Var Tanh(const Var& a) {
  return Unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var Sigmoid(const Var& a) {
  return Unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var Relu(const Var& a) {
  return Unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var Exp(const Var& a) {
  return Unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var AddBias(const Var& x, const Var& v) {
  const int n = LastDim(x.shape());
  if (v.value().numel() != static_cast<size_t>(n)) {
    throw Error("add_bias: bias of " + std::to_string(v.value().numel()) + " for last dim " +
                std::to_string(n));
  }
  Tensor out = x.value();
  const size_t rows = out.numel() / n;
  for (size_t r = 0; r < rows; ++r) {
    for (int j = 0; j < n; ++j) out[r * n + j] += v.value()[j];
  }
  return MakeResult(std::move(out), {x, v}, [n, rows](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = InGrad(self, 1)) {
      for (size_t r = 0; r < rows; ++r) {
        for (int j = 0; j < n; ++j) (*g)[j] += self.grad[r * n + j];
      }
    }
  });
}

Var AddRows(const Var& x, const Var& q) {
  if (x.value().rank() != 3 || q.value().rank() != 2 || x.dim(0) != q.dim(0) || x.dim(2) != q.dim(1)) {
    throw Error("add_rows: shapes " + ShapeString(x.shape()) + " and " + ShapeString(q.shape()));
  }
  const int B = x.dim(0), L = x.dim(1), A = x.dim(2);
  Tensor out = x.value();
  for (int b = 0; b < B; ++b) {
    const double* qb = q.value().data() + static_cast<size_t>(b) * A;
    for (int l = 0; l < L; ++l) {
      double* o = out.data() + (static_cast<size_t>(b) * L + l) * A;
      for (int a = 0; a < A; ++a) o[a] += qb[a];
    }
  }
  return MakeResult(std::move(out), {x, q}, [B, L, A](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = InGrad(self, 1)) {
      for (int b = 0; b < B; ++b) {
        double* gq = g->data() + static_cast<size_t>(b) * A;
        for (int l = 0; l < L; ++l) {
          const double* go = self.grad.data() + (static_cast<size_t>(b) * L + l) * A;
          for (int a = 0; a < A; ++a) gq[a] += go[a];
        }
      }
    }
  });
}

Var MaskTime(const Var& x, const std::vector<double>& mask) {
  const size_t rows = mask.size();
  if (rows == 0 || x.value().numel() % rows != 0) throw Error("mask_time: mask size mismatch");
  const size_t width = x.value().numel() / rows;
  Tensor out = x.value();
  for (size_t r = 0; r < rows; ++r) {
    if (mask[r] == 1.0) continue;
    for (size_t j = 0; j < width; ++j) out[r * width + j] *= mask[r];
  }
  return MakeResult(std::move(out), {x}, [mask, width](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t r = 0; r < mask.size(); ++r) {
        for (size_t j = 0; j < width; ++j) (*g)[r * width + j] += mask[r] * self.grad[r * width + j];
      }
    }
  });
}

// ---- shape -----------------------------------------------------------------

Var Reshape(const Var& a, Shape shape) {
  Tensor v = a.value().Reshaped(std::move(shape));
  return MakeResult(std::move(v), {a}, [](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var Concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  const size_t rows = NumElements(lead);
  std::vector<int> widths;
  int total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    int w = s.back();
    s.pop_back();
    if (s != lead) throw Error("concat: leading shape mismatch " + ShapeString(p.shape()));
    widths.push_back(w);
    total += w;
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  int offset = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].value().data();
    for (size_t r = 0; r < rows; ++r) {
      std::copy(src + r * widths[k], src + (r + 1) * widths[k], out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  return MakeResult(std::move(out), parts, [widths, rows, total](Node& self) {
    int off = 0;
    for (size_t k = 0; k < widths.size(); ++k) {
      if (Tensor* g = InGrad(self, k)) {
        for (size_t r = 0; r < rows; ++r) {
          const double* src = self.grad.data() + r * total + off;
          double* dst = g->data() + r * widths[k];
          for (int j = 0; j < widths[k]; ++j) dst[j] += src[j];
        }
      }
      off += widths[k];
    }
  });
}

Var SliceLast(const Var& a, int start, int length) {
  const int n = LastDim(a.shape());
  if (start < 0 || length < 0 || start + length > n) throw Error("slice: range out of bounds");
  Shape s = a.shape();
  s.back() = length;
  const size_t rows = a.value().numel() / n;
  Tensor out(s);
  for (size_t r = 0; r < rows; ++r) {
    const double* src = a.value().data() + r * n + start;
    std::copy(src, src + length, out.data() + r * length);
  }
  return MakeResult(std::move(out), {a}, [n, start, length, rows](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t r = 0; r < rows; ++r) {
        double* dst = g->data() + r * n + start;
        const double* src = self.grad.data() + r * length;
        for (int j = 0; j < length; ++j) dst[j] += src[j];
      }
    }
  });
}

Var StackTime(const std::vector<Var>& steps) {
  if (steps.empty()) throw Error("stack_time: no steps");
  const int B = steps[0].dim(0);
  const int D = steps[0].dim(1);
  const int T = static_cast<int>(steps.size());
  Tensor out(Shape{B, T, D});
  for (int t = 0; t < T; ++t) {
    if (steps[t].shape() != steps[0].shape()) throw Error("stack_time: step shape mismatch");
    const double* src = steps[t].value().data();
    for (int b = 0; b < B; ++b) {
      std::copy(src + static_cast<size_t>(b) * D, src + static_cast<size_t>(b + 1) * D,
                out.data() + (static_cast<size_t>(b) * T + t) * D);
    }
  }
  return MakeResult(std::move(out), steps, [B, T, D](Node& self) {
    for (int t = 0; t < T; ++t) {
      if (Tensor* g = InGrad(self, static_cast<size_t>(t))) {
        for (int b = 0; b < B; ++b) {
          const double* src = self.grad.data() + (static_cast<size_t>(b) * T + t) * D;
          double* dst = g->data() + static_cast<size_t>(b) * D;
          for (int d = 0; d < D; ++d) dst[d] += src[d];
        }
      }
    }
  });
}

Var SliceFirst(const Var& x, int start, int length) {
  if (x.value().rank() < 1 || start < 0 || length < 0 || start + length > x.dim(0)) {
    throw Error("slice_first: range out of bounds for " + ShapeString(x.shape()));
  }
  const size_t row = x.value().numel() / x.dim(0);
  Shape s = x.shape();
  s[0] = length;
  Tensor out(s);
  const double* src = x.value().data() + row * start;
  std::copy(src, src + row * length, out.data());
  return MakeResult(std::move(out), {x}, [row, start](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      double* dst = g->data() + row * start;
      for (size_t i = 0; i < self.grad.numel(); ++i) dst[i] += self.grad[i];
    }
  });
}

Var SelectTime(const Var& x, int t) {
  if (x.value().rank() != 3 || t < 0 || t >= x.dim(1)) throw Error("select_time: bad index or rank");
  const int B = x.dim(0), T = x.dim(1), D = x.dim(2);
  Tensor out(Shape{B, D});
  for (int b = 0; b < B; ++b) {
    const double* src = x.value().data() + (static_cast<size_t>(b) * T + t) * D;
    std::copy(src, src + D, out.data() + static_cast<size_t>(b) * D);
  }
  return MakeResult(std::move(out), {x}, [B, T, D, t](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (int b = 0; b < B; ++b) {
        double* dst = g->data() + (static_cast<size_t>(b) * T + t) * D;
        const double* src = self.grad.data() + static_cast<size_t>(b) * D;
        for (int d = 0; d < D; ++d) dst[d] += src[d];
      }
    }
  });
}

// ---- dense layers ---------------------------------------------------------------

Var Linear(const Var& x, const Var& w, const Var* b) {
  if (w.value().rank() != 2) throw Error("linear: weight must be 2-D");
  const int out_dim = w.dim(0);
  const int in_dim = w.dim(1);
  if (LastDim(x.shape()) != in_dim) {
    throw Error("linear: input " + ShapeString(x.shape()) + " vs weight " + ShapeString(w.shape()));
  }
  const int rows = static_cast<int>(x.value().numel() / in_dim);
  Shape s = x.shape();
  s.back() = out_dim;
  Tensor y(s);
  kernels::Gemm(false, true, rows, out_dim, in_dim, x.value().data(), w.value().data(), y.data(), false);
  if (b) {
    for (int r = 0; r < rows; ++r) {
      double* yr = y.data() + static_cast<size_t>(r) * out_dim;
      for (int j = 0; j < out_dim; ++j) yr[j] += b->value()[j];
    }
  }
  std::vector<Var> inputs = {x, w};
  if (b) inputs.push_back(*b);
  return MakeResult(std::move(y), inputs, [rows, out_dim, in_dim](Node& self) {
    const Tensor& X = InValue(self, 0);
    const Tensor& W = InValue(self, 1);
    if (Tensor* g = InGrad(self, 0)) {
      kernels::Gemm(false, false, rows, in_dim, out_dim, self.grad.data(), W.data(), g->data(), true);
    }
    if (Tensor* g = InGrad(self, 1)) {
      kernels::Gemm(true, false, out_dim, in_dim, rows, self.grad.data(), X.data(), g->data(), true);
    }
    if (self.inputs.size() > 2) {
      if (Tensor* g = InGrad(self, 2)) {
        for (int r = 0; r < rows; ++r) {
          const double* gr = self.grad.data() + static_cast<size_t>(r) * out_dim;
          for (int j = 0; j < out_dim; ++j) (*g)[j] += gr[j];
        }
      }
    }
  });
}

Var Embedding(const std::vector<int>& ids, int batch, int length, const Var& table) {
  if (ids.size() != static_cast<size_t>(batch) * length) throw Error("embedding: id count mismatch");
  const int V = table.dim(0);
  const int E = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= V) throw Error("out-of-vocabulary id " + std::to_string(id));
  }
  Tensor out(Shape{batch, length, E});
  for (size_t i = 0; i < ids.size(); ++i) {
    const double* src = table.value().data() + static_cast<size_t>(ids[i]) * E;
    std::copy(src, src + E, out.data() + i * E);
  }
  return MakeResult(std::move(out), {table}, [ids, E](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < ids.size(); ++i) {
        double* dst = g->data() + static_cast<size_t>(ids[i]) * E;
        const double* src = self.grad.data() + i * E;
        for (int e = 0; e < E; ++e) dst[e] += src[e];
      }
    }
  });
}

Var Conv1d(const Var& x, const Var& w, const Var* b, int dilation) {
  if (x.value().rank() != 3 || w.value().rank() != 3) throw Error("conv1d: expects 3-D input and weight");
  const int B = x.dim(0), L = x.dim(1), Cin = x.dim(2);
  const int Cout = w.dim(0), K = w.dim(2);
  if (w.dim(1) != Cin) {
    throw Error("conv1d: input " + ShapeString(x.shape()) + " vs weight " + ShapeString(w.shape()));
  }
  if (K % 2 != 1) throw Error("conv1d: kernel must be odd");
  const int rows = B * L;
  const int width = Cin * K;
  auto cols = std::make_shared<std::vector<double>>(static_cast<size_t>(rows) * width);
  kernels::Im2Col(x.value().data(), B, L, Cin, K, dilation, cols->data());
  Tensor y(Shape{B, L, Cout});
  kernels::Gemm(false, true, rows, Cout, width, cols->data(), w.value().data(), y.data(), false);
  if (b) {
    for (int r = 0; r < rows; ++r) {
      double* yr = y.data() + static_cast<size_t>(r) * Cout;
      for (int j = 0; j < Cout; ++j) yr[j] += b->value()[j];
    }
  }
  std::vector<Var> inputs = {x, w};
  if (b) inputs.push_back(*b);
  return MakeResult(std::move(y), inputs, [=](Node& self) {
    const Tensor& W = InValue(self, 1);
    if (Tensor* g = InGrad(self, 1)) {
      kernels::Gemm(true, false, Cout, width, rows, self.grad.data(), cols->data(), g->data(), true);
    }
    if (Tensor* g = InGrad(self, 0)) {
      std::vector<double> dcols(static_cast<size_t>(rows) * width);
      kernels::Gemm(false, false, rows, width, Cout, self.grad.data(), W.data(), dcols.data(), false);
      kernels::Col2Im(dcols.data(), B, L, Cin, K, dilation, g->data());
    }
    if (self.inputs.size() > 2) {
      if (Tensor* g = InGrad(self, 2)) {
        for (int r = 0; r < rows; ++r) {
          const double* gr = self.grad.data() + static_cast<size_t>(r) * Cout;
          for (int j = 0; j < Cout; ++j) (*g)[j] += gr[j];
        }
      }
    }
  });
}

Var ConvTranspose1d(const Var& x, const Var& w, const Var* b, int stride) {
  if (x.value().rank() != 2 || w.value().rank() != 3) {
    throw Error("conv_transpose1d: expects [T, Cin] input and [Cin, K, Cout] weight");
  }
  const int T = x.dim(0), Cin = x.dim(1);
  const int K = w.dim(1), Cout = w.dim(2);
  if (w.dim(0) != Cin) throw Error("conv_transpose1d: channel mismatch");
  const int rows = (T - 1) * stride + K;
  const int width = K * Cout;
  std::vector<double> p(static_cast<size_t>(T) * width);
  kernels::Gemm(false, false, T, width, Cin, x.value().data(), w.value().data(), p.data(), false);
  Tensor y(Shape{rows, Cout});
  kernels::ScatterFrames(p.data(), T, K, Cout, stride, y.data());
  if (b) {
    for (int r = 0; r < rows; ++r) {
      double* yr = y.data() + static_cast<size_t>(r) * Cout;
      for (int j = 0; j < Cout; ++j) yr[j] += b->value()[j];
    }
  }
  std::vector<Var> inputs = {x, w};
  if (b) inputs.push_back(*b);
  return MakeResult(std::move(y), inputs, [=](Node& self) {
    std::vector<double> dp(static_cast<size_t>(T) * width);
    kernels::GatherFrames(self.grad.data(), T, K, Cout, stride, dp.data());
    const Tensor& X = InValue(self, 0);
    const Tensor& W = InValue(self, 1);
    if (Tensor* g = InGrad(self, 0)) {
      kernels::Gemm(false, true, T, Cin, width, dp.data(), W.data(), g->data(), true);
    }
    if (Tensor* g = InGrad(self, 1)) {
      kernels::Gemm(true, false, Cin, width, T, X.data(), dp.data(), g->data(), true);
    }
    if (self.inputs.size() > 2) {
      if (Tensor* g = InGrad(self, 2)) {
        for (int r = 0; r < rows; ++r) {
          const double* gr = self.grad.data() + static_cast<size_t>(r) * Cout;
          for (int j = 0; j < Cout; ++j) (*g)[j] += gr[j];
        }
      }
    }
  });
}

Var Dropout(const Var& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  const double keep = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.value().numel());
  for (double& m : *mask) m = rng.Uniform() >= p ? keep : 0.0;
  Tensor out = x.value();
  for (size_t i = 0; i < out.numel(); ++i) out[i] *= (*mask)[i];
  return MakeResult(std::move(out), {x}, [mask](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * (*mask)[i];
    }
  });
}

Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int C = LastDim(x.shape());
  if (gamma.value().numel() != static_cast<size_t>(C) || beta.value().numel() != static_cast<size_t>(C)) {
    throw Error("layer_norm: parameter size mismatch");
  }
  const size_t rows = x.value().numel() / C;
  auto xhat = std::make_shared<std::vector<double>>(x.value().numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(x.shape());
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.value().data() + r * C;
    double mean = 0.0;
    for (int j = 0; j < C; ++j) mean += xr[j];
    mean /= C;
    double var = 0.0;
    for (int j = 0; j < C; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= C;
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int j = 0; j < C; ++j) {
      double h = (xr[j] - mean) * is;
      (*xhat)[r * C + j] = h;
      out[r * C + j] = gamma.value()[j] * h + beta.value()[j];
    }
  }
  return MakeResult(std::move(out), {x, gamma, beta}, [=](Node& self) {
    const Tensor& G = InValue(self, 1);
    Tensor* gx = InGrad(self, 0);
    Tensor* gg = InGrad(self, 1);
    Tensor* gb = InGrad(self, 2);
    for (size_t r = 0; r < rows; ++r) {
      const double* go = self.grad.data() + r * C;
      const double* h = xhat->data() + r * C;
      if (gg || gb) {
        for (int j = 0; j < C; ++j) {
          if (gg) (*gg)[j] += go[j] * h[j];
          if (gb) (*gb)[j] += go[j];
        }
      }
      if (gx) {
        double mean_g = 0.0, mean_gh = 0.0;
        for (int j = 0; j < C; ++j) {
          double gh = go[j] * G[j];
          mean_g += gh;
          mean_gh += gh * h[j];
        }
        mean_g /= C;
        mean_gh /= C;
        for (int j = 0; j < C; ++j) {
          double gh = go[j] * G[j];
          (*gx)[r * C + j] += (*inv_std)[r] * (gh - mean_g - h[j] * mean_gh);
        }
      }
    }
  });
}

Var BatchNorm(const Var& x, const Var& gamma, const Var& beta, const std::vector<double>& mask,
              bool training, const BatchNormState& state) {
  const int C = LastDim(x.shape());
  const size_t rows = x.value().numel() / C;
  if (mask.size() != rows) throw Error("batch_norm: mask size mismatch");
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  double count = 0.0;
  for (double m : mask) count += m;
  if (training) {
    if (count < 1.0) throw Error("batch_norm: no valid positions");
    for (size_t r = 0; r < rows; ++r) {
      if (mask[r] == 0.0) continue;
      const double* xr = x.value().data() + r * C;
      for (int c = 0; c < C; ++c) mean[c] += xr[c];
    }
    for (int c = 0; c < C; ++c) mean[c] /= count;
    for (size_t r = 0; r < rows; ++r) {
      if (mask[r] == 0.0) continue;
      const double* xr = x.value().data() + r * C;
      for (int c = 0; c < C; ++c) var[c] += (xr[c] - mean[c]) * (xr[c] - mean[c]);
    }
    for (int c = 0; c < C; ++c) var[c] /= count;
    if (state.running_mean && state.running_var) {
      const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
      for (int c = 0; c < C; ++c) {
        (*state.running_mean)[c] = (1 - state.momentum) * (*state.running_mean)[c] + state.momentum * mean[c];
        (*state.running_var)[c] =
            (1 - state.momentum) * (*state.running_var)[c] + state.momentum * var[c] * unbias;
      }
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = (*state.running_mean)[c];
      var[c] = (*state.running_var)[c];
    }
  }
  auto inv_std = std::make_shared<std::vector<double>>(C);
  for (int c = 0; c < C; ++c) (*inv_std)[c] = 1.0 / std::sqrt(var[c] + state.eps);
  auto xhat = std::make_shared<std::vector<double>>(x.value().numel(), 0.0);
  Tensor out(x.shape());
  for (size_t r = 0; r < rows; ++r) {
    if (mask[r] == 0.0) continue;
    const double* xr = x.value().data() + r * C;
    for (int c = 0; c < C; ++c) {
      double h = (xr[c] - mean[c]) * (*inv_std)[c];
      (*xhat)[r * C + c] = h;
      out[r * C + c] = gamma.value()[c] * h + beta.value()[c];
    }
  }
  return MakeResult(std::move(out), {x, gamma, beta}, [=](Node& self) {
    const Tensor& G = InValue(self, 1);
    Tensor* gx = InGrad(self, 0);
    Tensor* gg = InGrad(self, 1);
    Tensor* gb = InGrad(self, 2);
    std::vector<double> sum_g(C, 0.0), sum_gh(C, 0.0);
    for (size_t r = 0; r < rows; ++r) {
      if (mask[r] == 0.0) continue;
      for (int c = 0; c < C; ++c) {
        double go = self.grad[r * C + c];
        double h = (*xhat)[r * C + c];
        if (gg) (*gg)[c] += go * h;
        if (gb) (*gb)[c] += go;
        sum_g[c] += go * G[c];
        sum_gh[c] += go * G[c] * h;
      }
    }
    if (!gx) return;
    for (size_t r = 0; r < rows; ++r) {
      if (mask[r] == 0.0) continue;
      for (int c = 0; c < C; ++c) {
        double gh = self.grad[r * C + c] * G[c];
        if (training) {
          double h = (*xhat)[r * C + c];
          (*gx)[r * C + c] += (*inv_std)[c] * (gh - sum_g[c] / count - h * sum_gh[c] / count);
        } else {
          (*gx)[r * C + c] += (*inv_std)[c] * gh;
        }
      }
    }
  });
}

Var LstmCell(const Var& x, const Var& h, const Var& c, const Var& w_ih, const Var& w_hh,
             const Var& bias, const std::vector<double>* step_mask) {
  const int B = x.dim(0);
  const int in_dim = x.dim(1);
  const int H = h.dim(1);
  if (w_ih.dim(0) != 4 * H || w_ih.dim(1) != in_dim || w_hh.dim(0) != 4 * H || w_hh.dim(1) != H ||
      bias.value().numel() != static_cast<size_t>(4 * H) || c.dim(1) != H) {
    throw Error("lstm_cell: shape mismatch (x " + ShapeString(x.shape()) + ", w_ih " +
                ShapeString(w_ih.shape()) + ")");
  }
  std::vector<double> mask = step_mask ? *step_mask : std::vector<double>(B, 1.0);
  // acts holds sigmoid/tanh gate activations; tc holds tanh(c').
  auto acts = std::make_shared<std::vector<double>>(static_cast<size_t>(B) * 4 * H);
  auto tc = std::make_shared<std::vector<double>>(static_cast<size_t>(B) * H);
  kernels::Gemm(false, true, B, 4 * H, in_dim, x.value().data(), w_ih.value().data(), acts->data(), false);
  kernels::Gemm(false, true, B, 4 * H, H, h.value().data(), w_hh.value().data(), acts->data(), true);
  Tensor out(Shape{B, 2 * H});
  for (int b = 0; b < B; ++b) {
    double* a = acts->data() + static_cast<size_t>(b) * 4 * H;
    for (int j = 0; j < 4 * H; ++j) a[j] += bias.value()[j];
    for (int j = 0; j < H; ++j) {
      a[j] = 1.0 / (1.0 + std::exp(-a[j]));
      a[H + j] = 1.0 / (1.0 + std::exp(-a[H + j]));
      a[2 * H + j] = std::tanh(a[2 * H + j]);
      a[3 * H + j] = 1.0 / (1.0 + std::exp(-a[3 * H + j]));
    }
    const double* hp = h.value().data() + static_cast<size_t>(b) * H;
    const double* cp = c.value().data() + static_cast<size_t>(b) * H;
    double* ho = out.data() + static_cast<size_t>(b) * 2 * H;
    double* co = ho + H;
    for (int j = 0; j < H; ++j) {
      double cn = a[H + j] * cp[j] + a[j] * a[2 * H + j];
      double t = std::tanh(cn);
      (*tc)[static_cast<size_t>(b) * H + j] = t;
      if (mask[b] != 0.0) {
        ho[j] = a[3 * H + j] * t;
        co[j] = cn;
      } else {
        ho[j] = hp[j];
        co[j] = cp[j];
      }
    }
  }
  return MakeResult(std::move(out), {x, h, c, w_ih, w_hh, bias}, [=](Node& self) {
    const Tensor& X = InValue(self, 0);
    const Tensor& Hp = InValue(self, 1);
    const Tensor& Cp = InValue(self, 2);
    const Tensor& Wih = InValue(self, 3);
    const Tensor& Whh = InValue(self, 4);
    std::vector<double> da(static_cast<size_t>(B) * 4 * H, 0.0);
    Tensor* gh = InGrad(self, 1);
    Tensor* gc = InGrad(self, 2);
    for (int b = 0; b < B; ++b) {
      const double* gho = self.grad.data() + static_cast<size_t>(b) * 2 * H;
      const double* gco = gho + H;
      if (mask[b] == 0.0) {
        for (int j = 0; j < H; ++j) {
          if (gh) (*gh)[static_cast<size_t>(b) * H + j] += gho[j];
          if (gc) (*gc)[static_cast<size_t>(b) * H + j] += gco[j];
        }
        continue;
      }
      const double* a = acts->data() + static_cast<size_t>(b) * 4 * H;
      double* d = da.data() + static_cast<size_t>(b) * 4 * H;
      for (int j = 0; j < H; ++j) {
        const double i = a[j], f = a[H + j], g = a[2 * H + j], o = a[3 * H + j];
        const double t = (*tc)[static_cast<size_t>(b) * H + j];
        const double dc = gco[j] + gho[j] * o * (1.0 - t * t);
        const double dout = gho[j] * t;
        d[j] = dc * g * i * (1.0 - i);
        d[H + j] = dc * Cp[static_cast<size_t>(b) * H + j] * f * (1.0 - f);
        d[2 * H + j] = dc * i * (1.0 - g * g);
        d[3 * H + j] = dout * o * (1.0 - o);
        if (gc) (*gc)[static_cast<size_t>(b) * H + j] += dc * f;
      }
    }
    if (Tensor* gx = InGrad(self, 0)) {
      kernels::Gemm(false, false, B, in_dim, 4 * H, da.data(), Wih.data(), gx->data(), true);
    }
    if (gh) kernels::Gemm(false, false, B, H, 4 * H, da.data(), Whh.data(), gh->data(), true);
    if (Tensor* g = InGrad(self, 3)) {
      kernels::Gemm(true, false, 4 * H, in_dim, B, da.data(), X.data(), g->data(), true);
    }
    if (Tensor* g = InGrad(self, 4)) {
      kernels::Gemm(true, false, 4 * H, H, B, da.data(), Hp.data(), g->data(), true);
    }
    if (Tensor* g = InGrad(self, 5)) {
      for (int b = 0; b < B; ++b) {
        for (int j = 0; j < 4 * H; ++j) (*g)[j] += da[static_cast<size_t>(b) * 4 * H + j];
      }
    }
  });
}

// ---- attention --------------------------------------------------------------------

Var MaskedSoftmax(const Var& x, const std::vector<int>& lengths) {
  const int B = x.dim(0), L = x.dim(1);
  if (lengths.size() != static_cast<size_t>(B)) throw Error("masked_softmax: lengths mismatch");
  Tensor out(x.shape(), 0.0);
  for (int b = 0; b < B; ++b) {
    const int n = std::clamp(lengths[b], 1, L);
    const double* xr = x.value().data() + static_cast<size_t>(b) * L;
    double* o = out.data() + static_cast<size_t>(b) * L;
    double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (int l = 0; l < n; ++l) {
      o[l] = std::exp(xr[l] - mx);
      z += o[l];
    }
    for (int l = 0; l < n; ++l) o[l] /= z;
  }
  return MakeResult(std::move(out), {x}, [B, L](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (int b = 0; b < B; ++b) {
        const double* y = self.value.data() + static_cast<size_t>(b) * L;
        const double* go = self.grad.data() + static_cast<size_t>(b) * L;
        double dot = 0.0;
        for (int l = 0; l < L; ++l) dot += y[l] * go[l];
        for (int l = 0; l < L; ++l) (*g)[static_cast<size_t>(b) * L + l] += y[l] * (go[l] - dot);
      }
    }
  });
}

Var WeightedSum(const Var& w, const Var& memory) {
  const int B = memory.dim(0), L = memory.dim(1), D = memory.dim(2);
  if (w.dim(0) != B || w.dim(1) != L) throw Error("weighted_sum: shape mismatch");
  Tensor out(Shape{B, D}, 0.0);
  for (int b = 0; b < B; ++b) {
    double* o = out.data() + static_cast<size_t>(b) * D;
    for (int l = 0; l < L; ++l) {
      const double wv = w.value()[static_cast<size_t>(b) * L + l];
      if (wv == 0.0) continue;
      const double* m = memory.value().data() + (static_cast<size_t>(b) * L + l) * D;
      for (int d = 0; d < D; ++d) o[d] += wv * m[d];
    }
  }
  return MakeResult(std::move(out), {w, memory}, [B, L, D](Node& self) {
    const Tensor& W = InValue(self, 0);
    const Tensor& M = InValue(self, 1);
    Tensor* gw = InGrad(self, 0);
    Tensor* gm = InGrad(self, 1);
    for (int b = 0; b < B; ++b) {
      const double* go = self.grad.data() + static_cast<size_t>(b) * D;
      for (int l = 0; l < L; ++l) {
        const size_t row = static_cast<size_t>(b) * L + l;
        if (gw) {
          const double* m = M.data() + row * D;
          double s = 0.0;
          for (int d = 0; d < D; ++d) s += go[d] * m[d];
          (*gw)[row] += s;
        }
        if (gm) {
          const double wv = W[row];
          double* dst = gm->data() + row * D;
          for (int d = 0; d < D; ++d) dst[d] += wv * go[d];
        }
      }
    }
  });
}

// ---- reductions and losses -------------------------------------------------------

Var Sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().vec()) s += v;
  return MakeResult(Tensor::Scalar(s), {a}, [](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[0];
    }
  });
}

Var Mean(const Var& a) {
  const double n = static_cast<double>(a.value().numel());
  return Scale(Sum(a), 1.0 / n);
}

Var SumSquares(const Var& a) {
  double s = 0.0;
  for (double v : a.value().vec()) s += v * v;
  return MakeResult(Tensor::Scalar(s), {a}, [](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      const Tensor& x = InValue(self, 0);
      for (size_t i = 0; i < g->numel(); ++i) (*g)[i] += 2.0 * x[i] * self.grad[0];
    }
  });
}

Var MaskedMse(const Var& pred, const Tensor& target, const std::vector<double>& mask) {
  if (pred.shape() != target.shape()) {
    throw Error("mse: shape mismatch " + ShapeString(pred.shape()) + " vs " + ShapeString(target.shape()));
  }
  const size_t rows = mask.size();
  if (rows == 0 || pred.value().numel() % rows != 0) throw Error("mse: mask size mismatch");
  const size_t width = pred.value().numel() / rows;
  double count = 0.0;
  for (double m : mask) count += m;
  const double denom = count * static_cast<double>(width);
  double s = 0.0;
  for (size_t r = 0; r < rows; ++r) {
    if (mask[r] == 0.0) continue;
    for (size_t j = 0; j < width; ++j) {
      double d = pred.value()[r * width + j] - target[r * width + j];
      s += d * d;
    }
  }
  double value = denom > 0 ? s / denom : 0.0;
  return MakeResult(Tensor::Scalar(value), {pred}, [target, mask, width, denom](Node& self) {
    if (denom <= 0) return;
    if (Tensor* g = InGrad(self, 0)) {
      const Tensor& p = InValue(self, 0);
      const double k = 2.0 * self.grad[0] / denom;
      for (size_t r = 0; r < mask.size(); ++r) {
        if (mask[r] == 0.0) continue;
        for (size_t j = 0; j < width; ++j) {
          (*g)[r * width + j] += k * (p[r * width + j] - target[r * width + j]);
        }
      }
    }
  });
}

Var MaskedBceWithLogits(const Var& logits, const Tensor& target, const std::vector<double>& mask, double pos_weight) {
  if (logits.value().numel() != target.numel() || target.numel() != mask.size()) {
    throw Error("bce: shape mismatch");
  }
  double count = 0.0;
  double s = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double z = logits.value()[i];
    const double y = target[i];
    // (1-y) z + (1 + (w-1) y) softplus(-z)
    s += (1.0 - y) * z + (1.0 + (pos_weight - 1.0) * y) * (std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z))));
    count += 1.0;
  }
  double value = count > 0 ? s / count : 0.0;
  return MakeResult(Tensor::Scalar(value), {logits}, [target, mask, count, pos_weight](Node& self) {
    if (count <= 0) return;
    if (Tensor* g = InGrad(self, 0)) {
      const Tensor& z = InValue(self, 0);
      for (size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] == 0.0) continue;
        const double p = 1.0 / (1.0 + std::exp(-z[i]));
        const double y = target[i];
        (*g)[i] += self.grad[0] * ((1.0 - y) - (1.0 + (pos_weight - 1.0) * y) * (1.0 - p)) / count;
      }
    }
  });
}

bool Invert(const Tensor& w, Tensor* inverse) {
  const int n = w.dim(0);
  std::vector<double> a = w.vec();
  std::vector<double> inv(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i) * n + i] = 1.0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[static_cast<size_t>(r) * n + col]) > std::abs(a[static_cast<size_t>(piv) * n + col])) piv = r;
    }
    if (std::abs(a[static_cast<size_t>(piv) * n + col]) < 1e-300) return false;
    if (piv != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(a[static_cast<size_t>(piv) * n + j], a[static_cast<size_t>(col) * n + j]);
        std::swap(inv[static_cast<size_t>(piv) * n + j], inv[static_cast<size_t>(col) * n + j]);
      }
    }
    const double d = a[static_cast<size_t>(col) * n + col];
    for (int j = 0; j < n; ++j) {
      a[static_cast<size_t>(col) * n + j] /= d;
      inv[static_cast<size_t>(col) * n + j] /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<size_t>(r) * n + col];
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a[static_cast<size_t>(r) * n + j] -= f * a[static_cast<size_t>(col) * n + j];
        inv[static_cast<size_t>(r) * n + j] -= f * inv[static_cast<size_t>(col) * n + j];
      }
    }
  }
  *inverse = Tensor(w.shape(), std::move(inv));
  return true;
}

double LogAbsDeterminant(const Tensor& w, int* sign) {
  const int n = w.dim(0);
  std::vector<double> a = w.vec();
  double logdet = 0.0;
  int s = 1;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[static_cast<size_t>(r) * n + col]) > std::abs(a[static_cast<size_t>(piv) * n + col])) piv = r;
    }
    const double p = a[static_cast<size_t>(piv) * n + col];
    if (p == 0.0) {
      if (sign) *sign = 0;
      return -INFINITY;
    }
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(a[static_cast<size_t>(piv) * n + j], a[static_cast<size_t>(col) * n + j]);
      s = -s;
    }
    if (p < 0) s = -s;
    logdet += std::log(std::abs(p));
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<size_t>(r) * n + col] / p;
      for (int j = col; j < n; ++j) a[static_cast<size_t>(r) * n + j] -= f * a[static_cast<size_t>(col) * n + j];
    }
  }
  if (sign) *sign = s;
  return logdet;
}

Var LogAbsDet(const Var& w) {
  if (w.value().rank() != 2 || w.dim(0) != w.dim(1)) throw Error("logabsdet: needs a square matrix");
  const double v = LogAbsDeterminant(w.value());
  return MakeResult(Tensor::Scalar(v), {w}, [](Node& self) {
    if (Tensor* g = InGrad(self, 0)) {
      Tensor inv;
      if (!Invert(InValue(self, 0), &inv)) throw Error("logabsdet: singular matrix");
      const int n = inv.dim(0);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          (*g)[static_cast<size_t>(i) * n + j] += self.grad[0] * inv[static_cast<size_t>(j) * n + i];
        }
      }
    }
  });
}

}  // namespace comix::nn
