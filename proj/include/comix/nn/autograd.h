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

#ifndef COMIX_NN_AUTOGRAD_H_
#define COMIX_NN_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "comix/nn/tensor.h"
#include "comix/util/rng.h"

namespace comix::nn {

struct Node {
  Tensor value;
  // Empty until something flows into it.
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& GradBuffer();
};

// Handle to a node of the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }
  void ZeroGrad() { node_->grad = Tensor(); }

 private:
  friend Var MakeResult(Tensor value, std::vector<Var> inputs,
                        std::function<void(Node&)> backward);
  std::shared_ptr<Node> node_;
};

// Builds an op result; inputs and the backward closure are dropped when no
// input needs a gradient or grad mode is off.
Var MakeResult(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar.
void Backward(const Var& loss);

bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var Constant(Tensor value);

// ---- elementwise --------------------------------------------------------
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double s);
Var AddScalar(const Var& a, double s);
Var Tanh(const Var& a);
Var Sigmoid(const Var& a);
Var Relu(const Var& a);
Var Exp(const Var& a);
// x [..., n] + v [n] broadcast over leading dims.
Var AddBias(const Var& x, const Var& v);
// x [B, L, A] + q [B, A] broadcast over L.
Var AddRows(const Var& x, const Var& q);
// Zeroes x [B, L, ...] where mask [B, L] is 0.
Var MaskTime(const Var& x, const std::vector<double>& mask);

// ---- shape ----------------------------------------------------------------
Var Reshape(const Var& a, Shape shape);
// Concatenation along the last axis.
Var Concat(const std::vector<Var>& parts);
Var SliceLast(const Var& a, int start, int length);
// [B, D] x T -> [B, T, D].
Var StackTime(const std::vector<Var>& steps);
// Rows [start, start + length) along the first axis.
Var SliceFirst(const Var& x, int start, int length);
// x [B, T, D] -> [B, D] at time t.
Var SelectTime(const Var& x, int t);

// ---- dense layers ----------------------------------------------------------
// x [..., in] * w[out, in]^T (+ b[out]).
Var Linear(const Var& x, const Var& w, const Var* b);
// ids laid out [B, L]; returns [B, L, E].
Var Embedding(const std::vector<int>& ids, int batch, int length, const Var& table);
// Stride-1, "same"-padded dilated convolution over time.
// x [B, L, Cin], w [Cout, Cin, K] -> [B, L, Cout].
Var Conv1d(const Var& x, const Var& w, const Var* b, int dilation);
// x [T, Cin], w [Cin, K, Cout] -> [(T-1)*stride + K, Cout].
Var ConvTranspose1d(const Var& x, const Var& w, const Var* b, int stride);

Var Dropout(const Var& x, double p, Rng& rng);

Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

struct BatchNormState {
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  double momentum = 0.1;
  double eps = 1e-5;
};
// x [B, L, C]; training mode normalizes with statistics over positions where
// mask [B, L] is 1 and updates the running statistics.
Var BatchNorm(const Var& x, const Var& gamma, const Var& beta, const std::vector<double>& mask,
              bool training, const BatchNormState& state);

// Fused LSTM cell (gate order i, f, g, o). Returns [B, 2H] = concat(h', c').
// Rows with step_mask 0 carry (h, c) through unchanged.
Var LstmCell(const Var& x, const Var& h, const Var& c, const Var& w_ih, const Var& w_hh,
             const Var& bias, const std::vector<double>* step_mask = nullptr);

// ---- attention -------------------------------------------------------------
// Softmax over x [B, L] restricted to the first lengths[b] entries.
Var MaskedSoftmax(const Var& x, const std::vector<int>& lengths);
// w [B, L], memory [B, L, D] -> [B, D].
Var WeightedSum(const Var& w, const Var& memory);

// ---- reductions and losses -------------------------------------------------
Var Sum(const Var& a);
Var Mean(const Var& a);
Var SumSquares(const Var& a);
// Mean of (pred - target)^2 over frames with mask [B, T] = 1; pred [B, T, M].
Var MaskedMse(const Var& pred, const Tensor& target, const std::vector<double>& mask);
// Mean binary cross-entropy with logits over logits [B, T] where mask is 1.
// `pos_weight` scales the loss of positive targets.
Var MaskedBceWithLogits(const Var& logits, const Tensor& target, const std::vector<double>& mask,
                        double pos_weight = 1.0);
// log |det W| for square W.
Var LogAbsDet(const Var& w);

// ---- small dense linear algebra (no autograd) ------------------------------
// LU with partial pivoting; returns false for singular input.
bool Invert(const Tensor& w, Tensor* inverse);
double LogAbsDeterminant(const Tensor& w, int* sign = nullptr);

}  // namespace comix::nn

#endif  // COMIX_NN_AUTOGRAD_H_
