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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <functional>

#include "comix/error.h"
#include "comix/nn/autograd.h"
#include "comix/nn/kernels.h"
#include "comix/nn/params.h"
#include "comix/util/rng.h"
#include "support/synthetic.h"

namespace comix::nn {
namespace {

Tensor RandomTensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.vec()) v = scale * rng.Normal();
  return t;
}

using Fn = std::function<Var(const std::vector<Var>&)>;

// Projects the op output onto a fixed random direction so every output
// element contributes to the scalar.
Var Project(const Var& out, uint64_t seed) {
  Rng rng(seed);
  return Sum(Mul(out, Constant(RandomTensor(out.shape(), rng))));
}

// Central differences against the analytic gradient of every input element.
void CheckGradients(const Fn& fn, std::vector<Tensor> inputs, double tol = 1e-6, double h = 1e-5) {
  std::vector<Var> vars;
  for (auto& t : inputs) vars.emplace_back(t, true);
  Var out = fn(vars);
  const uint64_t seed = 1234;
  Backward(Project(out, seed));
  for (size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = vars[k].grad();
    ASSERT_EQ(analytic.numel(), inputs[k].numel()) << "input " << k << " received no gradient";
    for (int i = 0; i < inputs[k].numel(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> probe;
        for (size_t j = 0; j < inputs.size(); ++j) {
          Tensor t = inputs[j];
          if (j == k) t.data()[i] += delta;
          probe.emplace_back(t, false);
        }
        NoGradGuard ng;
        return Project(fn(probe), seed).value().item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2 * h);
      const double a = analytic.data()[i];
      ASSERT_NEAR(a, numeric, tol * std::max(1.0, std::abs(numeric))) << "input " << k << " element " << i;
    }
  }
}

// ---- kernels ----------------------------------------------------------------

TEST(KernelsTest, GemmMatchesNaiveLoopAndReference) {
  Rng rng(1);
  for (int trial = 0; trial < 8; ++trial) {
    const int m = 1 + rng.Below(40), n = 1 + rng.Below(40), k = 1 + rng.Below(40);
    const bool ta = trial & 1, tb = trial & 2, acc = trial & 4;
    const Tensor a = RandomTensor(ta ? Shape{k, m} : Shape{m, k}, rng);
    const Tensor b = RandomTensor(tb ? Shape{n, k} : Shape{k, n}, rng);
    const Tensor c0 = RandomTensor({m, n}, rng);
    Tensor naive = c0, par = c0, ref = c0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = acc ? c0.data()[i * n + j] : 0.0;
        for (int p = 0; p < k; ++p) {
          s += (ta ? a.data()[p * m + i] : a.data()[i * k + p]) * (tb ? b.data()[j * k + p] : b.data()[p * n + j]);
        }
        naive.data()[i * n + j] = s;
      }
    }
    kernels::Gemm(ta, tb, m, n, k, a.data(), b.data(), par.data(), acc);
    kernels::reference::Gemm(ta, tb, m, n, k, a.data(), b.data(), ref.data(), acc);
    for (int i = 0; i < m * n; ++i) {
      ASSERT_NEAR(par.data()[i], naive.data()[i], 1e-10);
      ASSERT_NEAR(ref.data()[i], naive.data()[i], 1e-10);
    }
  }
}

TEST(KernelsTest, Im2ColAndScatterMatchReference) {
  Rng rng(2);
  const int B = 2, L = 9, C = 3, K = 3, dil = 2;
  const Tensor x = RandomTensor({B, L, C}, rng);
  std::vector<double> cols(B * L * C * K), cols_ref(cols.size());
  kernels::Im2Col(x.data(), B, L, C, K, dil, cols.data());
  kernels::reference::Im2Col(x.data(), B, L, C, K, dil, cols_ref.data());
  EXPECT_EQ(cols, cols_ref);
  std::vector<double> dx(B * L * C, 0.0), dx_ref(dx.size(), 0.0);
  kernels::Col2Im(cols.data(), B, L, C, K, dil, dx.data());
  kernels::reference::Col2Im(cols.data(), B, L, C, K, dil, dx_ref.data());
  for (size_t i = 0; i < dx.size(); ++i) ASSERT_NEAR(dx[i], dx_ref[i], 1e-12);

  const int T = 7, KK = 5, Co = 4, stride = 3;
  const Tensor p = RandomTensor({T, KK * Co}, rng);
  const int rows = (T - 1) * stride + KK;
  std::vector<double> out(rows * Co, 0.0), out_ref(out.size(), 0.0);
  kernels::ScatterFrames(p.data(), T, KK, Co, stride, out.data());
  kernels::reference::ScatterFrames(p.data(), T, KK, Co, stride, out_ref.data());
  for (size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], out_ref[i], 1e-12);
  std::vector<double> dp(T * KK * Co, 0.0), dp_ref(dp.size(), 0.0);
  kernels::GatherFrames(out.data(), T, KK, Co, stride, dp.data());
  kernels::reference::GatherFrames(out.data(), T, KK, Co, stride, dp_ref.data());
  for (size_t i = 0; i < dp.size(); ++i) ASSERT_NEAR(dp[i], dp_ref[i], 1e-12);
}

TEST(KernelsTest, ReferencePathGivesSameConvOutput) {
  Rng rng(3);
  const Tensor x = RandomTensor({2, 11, 4}, rng), w = RandomTensor({5, 4, 3}, rng);
  const Tensor fast = Conv1d(Constant(x), Constant(w), nullptr, 2).value();
  kernels::SetUseReference(true);
  const Tensor slow = Conv1d(Constant(x), Constant(w), nullptr, 2).value();
  kernels::SetUseReference(false);
  for (int i = 0; i < fast.numel(); ++i) ASSERT_NEAR(fast.data()[i], slow.data()[i], 1e-12);
}

// ---- forward oracles ----------------------------------------------------------

TEST(OpsTest, Conv1dMatchesDirectSum) {
  Rng rng(4);
  const int B = 2, L = 8, Ci = 3, Co = 2, K = 3, dil = 2;
  const Tensor x = RandomTensor({B, L, Ci}, rng), w = RandomTensor({Co, Ci, K}, rng), b = RandomTensor({Co}, rng);
  Var bv = Constant(b);
  const Tensor y = Conv1d(Constant(x), Constant(w), &bv, dil).value();
  const int half = (K - 1) / 2 * dil;
  for (int bb = 0; bb < B; ++bb) {
    for (int t = 0; t < L; ++t) {
      for (int o = 0; o < Co; ++o) {
        double s = b.data()[o];
        for (int c = 0; c < Ci; ++c) {
          for (int k = 0; k < K; ++k) {
            const int src = t + k * dil - half;
            if (src >= 0 && src < L) s += w.data()[(o * Ci + c) * K + k] * x.data()[(bb * L + src) * Ci + c];
          }
        }
        ASSERT_NEAR(y.data()[(bb * L + t) * Co + o], s, 1e-12);
      }
    }
  }
}

TEST(OpsTest, ConvTransposeMatchesDirectSum) {
  Rng rng(5);
  const int T = 4, Ci = 2, K = 5, Co = 3, stride = 2;
  const Tensor x = RandomTensor({T, Ci}, rng), w = RandomTensor({Ci, K, Co}, rng);
  const Tensor y = ConvTranspose1d(Constant(x), Constant(w), nullptr, stride).value();
  ASSERT_EQ(y.dim(0), (T - 1) * stride + K);
  std::vector<double> expect(y.numel(), 0.0);
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < Ci; ++c) {
      for (int k = 0; k < K; ++k) {
        for (int o = 0; o < Co; ++o) expect[(t * stride + k) * Co + o] += x.data()[t * Ci + c] * w.data()[(c * K + k) * Co + o];
      }
    }
  }
  for (int i = 0; i < y.numel(); ++i) ASSERT_NEAR(y.data()[i], expect[i], 1e-12);
}

TEST(OpsTest, LstmCellMatchesGateFormulas) {
  Rng rng(6);
  const int I = 2, H = 3;
  const Tensor x = RandomTensor({1, I}, rng), h = RandomTensor({1, H}, rng), c = RandomTensor({1, H}, rng);
  const Tensor wi = RandomTensor({4 * H, I}, rng), wh = RandomTensor({4 * H, H}, rng), b = RandomTensor({4 * H}, rng);
  const Tensor out = LstmCell(Constant(x), Constant(h), Constant(c), Constant(wi), Constant(wh), Constant(b)).value();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int j = 0; j < H; ++j) {
    double z[4];
    for (int g = 0; g < 4; ++g) {
      const int row = g * H + j;
      z[g] = b.data()[row];
      for (int i = 0; i < I; ++i) z[g] += wi.data()[row * I + i] * x.data()[i];
      for (int i = 0; i < H; ++i) z[g] += wh.data()[row * H + i] * h.data()[i];
    }
    const double cn = sig(z[1]) * c.data()[j] + sig(z[0]) * std::tanh(z[2]);
    const double hn = sig(z[3]) * std::tanh(cn);
    EXPECT_NEAR(out.data()[j], hn, 1e-12);
    EXPECT_NEAR(out.data()[H + j], cn, 1e-12);
  }
}

TEST(OpsTest, LstmCellCarriesMaskedRows) {
  Rng rng(7);
  const int H = 2;
  const Tensor h = RandomTensor({2, H}, rng), c = RandomTensor({2, H}, rng);
  const std::vector<double> mask = {1.0, 0.0};
  const Tensor out = LstmCell(Constant(RandomTensor({2, 3}, rng)), Constant(h), Constant(c),
                              Constant(RandomTensor({4 * H, 3}, rng)), Constant(RandomTensor({4 * H, H}, rng)),
                              Constant(RandomTensor({4 * H}, rng)), &mask)
                         .value();
  for (int j = 0; j < H; ++j) {
    EXPECT_EQ(out.data()[2 * H + j], h.data()[H + j]);
    EXPECT_EQ(out.data()[2 * H + H + j], c.data()[H + j]);
  }
}

TEST(OpsTest, MaskedSoftmaxRespectsLengths) {
  Rng rng(8);
  const Tensor y = MaskedSoftmax(Constant(RandomTensor({2, 5}, rng)), {3, 5}).value();
  double s0 = 0, s1 = 0;
  for (int i = 0; i < 5; ++i) {
    s0 += y.data()[i];
    s1 += y.data()[5 + i];
  }
  EXPECT_NEAR(s0, 1.0, 1e-12);
  EXPECT_NEAR(s1, 1.0, 1e-12);
  EXPECT_EQ(y.data()[3], 0.0);
  EXPECT_EQ(y.data()[4], 0.0);
}

TEST(OpsTest, BatchNormZeroAtPaddingAndUpdatesStats) {
  Rng rng(9);
  const Tensor x = RandomTensor({2, 3, 2}, rng, 2.0);
  const std::vector<double> mask = {1, 1, 1, 1, 0, 0};
  Tensor rm({2}, 0.0), rv({2}, 1.0);
  BatchNormState st{&rm, &rv, 0.1, 1e-5};
  const Tensor y = BatchNorm(Constant(x), Constant(Tensor({2}, 1.0)), Constant(Tensor({2}, 0.5)), mask, true, st).value();
  for (int i = 4 * 2; i < 6 * 2; ++i) EXPECT_EQ(y.data()[i], 0.0);
  double mean0 = 0;
  for (int p = 0; p < 4; ++p) mean0 += x.data()[p * 2];
  EXPECT_NEAR(rm.data()[0], 0.1 * mean0 / 4, 1e-12);
}

TEST(OpsTest, InvertAndLogDet) {
  Tensor w({3, 3}, std::vector<double>{2, 1, 0, 0, 3, 1, 1, 0, 4});
  Tensor inv;
  ASSERT_TRUE(Invert(w, &inv));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += w.data()[i * 3 + k] * inv.data()[k * 3 + j];
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
    }
  }
  // det = 2*(12-0) - 1*(0-1) + 0 = 25.
  int sign = 0;
  EXPECT_NEAR(LogAbsDeterminant(w, &sign), std::log(25.0), 1e-12);
  EXPECT_EQ(sign, 1);
  EXPECT_FALSE(Invert(Tensor({2, 2}, std::vector<double>{1, 2, 2, 4}), &inv));
}

TEST(OpsTest, NoGradDropsGraph) {
  Var a(Tensor({2}, 1.0), true);
  NoGradGuard ng;
  Var b = Scale(a, 2.0);
  EXPECT_FALSE(b.requires_grad());
}

// ---- gradient checks ---------------------------------------------------------

TEST(GradCheckTest, Elementwise) {
  Rng rng(10);
  CheckGradients(
      [](const std::vector<Var>& v) {
        return Add(Mul(Tanh(v[0]), Sigmoid(v[1])), Sub(Exp(Scale(v[0], 0.3)), AddScalar(Relu(v[1]), 0.2)));
      },
      {RandomTensor({3, 4}, rng), RandomTensor({3, 4}, rng)});
}

TEST(GradCheckTest, LinearAndBias) {
  Rng rng(11);
  CheckGradients([](const std::vector<Var>& v) { return Linear(v[0], v[1], &v[2]); },
                 {RandomTensor({2, 3, 4}, rng), RandomTensor({5, 4}, rng), RandomTensor({5}, rng)});
  CheckGradients([](const std::vector<Var>& v) { return AddRows(v[0], v[1]); },
                 {RandomTensor({2, 3, 4}, rng), RandomTensor({2, 4}, rng)});
}

TEST(GradCheckTest, ShapeOps) {
  Rng rng(12);
  CheckGradients(
      [](const std::vector<Var>& v) {
        Var c = Concat({v[0], v[1]});
        Var s = SliceLast(c, 1, 3);
        Var st = StackTime({SelectTime(Reshape(s, {2, 1, 3}), 0), Scale(SelectTime(Reshape(s, {2, 1, 3}), 0), 2.0)});
        return SliceFirst(MaskTime(st, {1, 0, 1, 1}), 1, 1);
      },
      {RandomTensor({2, 2}, rng), RandomTensor({2, 3}, rng)});
}

TEST(GradCheckTest, Embedding) {
  Rng rng(13);
  const std::vector<int> ids = {1, 3, 1, 0, 2, 2};
  CheckGradients([&](const std::vector<Var>& v) { return Embedding(ids, 2, 3, v[0]); }, {RandomTensor({4, 3}, rng)});
}

TEST(GradCheckTest, Convolutions) {
  Rng rng(14);
  CheckGradients([](const std::vector<Var>& v) { return Conv1d(v[0], v[1], &v[2], 2); },
                 {RandomTensor({2, 6, 3}, rng), RandomTensor({2, 3, 3}, rng), RandomTensor({2}, rng)});
  CheckGradients([](const std::vector<Var>& v) { return ConvTranspose1d(v[0], v[1], &v[2], 2); },
                 {RandomTensor({3, 2}, rng), RandomTensor({2, 4, 3}, rng), RandomTensor({3}, rng)});
}

TEST(GradCheckTest, Normalization) {
  Rng rng(15);
  CheckGradients([](const std::vector<Var>& v) { return LayerNorm(v[0], v[1], v[2]); },
                 {RandomTensor({3, 5}, rng), RandomTensor({5}, rng), RandomTensor({5}, rng)});
  const std::vector<double> mask = {1, 1, 0, 1, 1, 1};
  CheckGradients(
      [&](const std::vector<Var>& v) {
        Tensor rm({2}, 0.0), rv({2}, 1.0);
        return BatchNorm(v[0], v[1], v[2], mask, true, {&rm, &rv, 0.1, 1e-5});
      },
      {RandomTensor({2, 3, 2}, rng), RandomTensor({2}, rng), RandomTensor({2}, rng)});
}

TEST(GradCheckTest, LstmCellWithMask) {
  Rng rng(16);
  const std::vector<double> mask = {1.0, 0.0};
  CheckGradients([&](const std::vector<Var>& v) { return LstmCell(v[0], v[1], v[2], v[3], v[4], v[5], &mask); },
                 {RandomTensor({2, 3}, rng), RandomTensor({2, 2}, rng), RandomTensor({2, 2}, rng),
                  RandomTensor({8, 3}, rng, 0.5), RandomTensor({8, 2}, rng, 0.5), RandomTensor({8}, rng)});
}

TEST(GradCheckTest, Attention) {
  Rng rng(17);
  CheckGradients([](const std::vector<Var>& v) { return WeightedSum(MaskedSoftmax(v[0], {2, 4}), v[1]); },
                 {RandomTensor({2, 4}, rng), RandomTensor({2, 4, 3}, rng)});
}

TEST(GradCheckTest, Losses) {
  Rng rng(18);
  const Tensor target = RandomTensor({2, 3, 2}, rng);
  const std::vector<double> mask = {1, 1, 0, 1, 0, 0};
  CheckGradients([&](const std::vector<Var>& v) { return MaskedMse(v[0], target, mask); },
                 {RandomTensor({2, 3, 2}, rng)});
  Tensor stops({2, 3}, std::vector<double>{0, 1, 0, 1, 0, 0});
  CheckGradients([&](const std::vector<Var>& v) { return MaskedBceWithLogits(v[0], stops, mask); },
                 {RandomTensor({2, 3}, rng)});
  CheckGradients([&](const std::vector<Var>& v) { return MaskedBceWithLogits(v[0], stops, mask, 5.0); },
                 {RandomTensor({2, 3}, rng)});
  CheckGradients([](const std::vector<Var>& v) { return Add(SumSquares(v[0]), Mean(v[0])); }, {RandomTensor({5}, rng)});
}

TEST(LossTest, WeightedBceMatchesLogForm) {
  const Tensor z({4}, std::vector<double>{-1.5, 0.3, 2.0, -0.2});
  const Tensor y({4}, std::vector<double>{1, 0, 1, 0});
  const std::vector<double> mask = {1, 1, 1, 0};
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    s -= 3.0 * y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  EXPECT_NEAR(MaskedBceWithLogits(Constant(z), y, mask, 3.0).value().item(), s / 3.0, 1e-12);
}

TEST(GradCheckTest, LogAbsDet) {
  Rng rng(19);
  Tensor w = RandomTensor({3, 3}, rng);
  for (int i = 0; i < 3; ++i) w.data()[i * 4] += 3.0;
  CheckGradients([](const std::vector<Var>& v) { return LogAbsDet(v[0]); }, {w});
}

// ---- parameters, checkpoints, optimizer -------------------------------------

TEST(ParamsTest, DigestTracksValuesAndPrefixes) {
  ParameterStore s;
  s.AddParameter("encoder.w", Tensor({2}, 1.0));
  s.AddParameter("decoder.w", Tensor({2}, 2.0));
  const std::string all = Digest(s), enc = Digest(s, {"encoder."});
  s.Get("decoder.w").mutable_value().data()[0] = 5.0;
  EXPECT_EQ(Digest(s, {"encoder."}), enc);
  EXPECT_NE(Digest(s), all);
  EXPECT_THROW(s.AddParameter("encoder.w", Tensor({1})), Error);
}

TEST(ParamsTest, CheckpointRoundTripIsBitExact) {
  Rng rng(20);
  ParameterStore s;
  s.AddParameter("a.weight", RandomTensor({3, 4}, rng));
  s.AddBuffer("a.running_mean", RandomTensor({4}, rng));
  const std::string path = testing::MakeTempDir("ckpt") + "/x.ckpt";
  SaveCheckpoint(path, s, {{"note", "hello"}});
  const Checkpoint ck = LoadCheckpoint(path);
  EXPECT_EQ(ck.metadata["note"], "hello");
  ParameterStore t;
  t.AddParameter("a.weight", Tensor({3, 4}));
  t.AddBuffer("a.running_mean", Tensor({4}));
  LoadStrict(ck, &t);
  EXPECT_EQ(Digest(t), Digest(s));
  EXPECT_TRUE(t.IsBuffer("a.running_mean"));
  ParameterStore bad;
  bad.AddParameter("a.weight", Tensor({4, 3}));
  try {
    LoadStrict(ck, &bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("a.weight"), std::string::npos);
  }
}

TEST(ParamsTest, CorruptCheckpointRejected) {
  const std::string path = testing::MakeTempDir("ckpt_bad") + "/x.ckpt";
  std::ofstream(path) << "not a checkpoint";
  EXPECT_THROW(LoadCheckpoint(path), Error);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  // With bias correction the first Adam update is lr * g / (|g| + eps').
  Var p(Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}), true);
  Adam adam({p}, AdamOptions{0.1, 0.9, 0.999, 1e-8, 0.0, 0.0});
  Backward(SumSquares(p));
  adam.Step();
  EXPECT_NEAR(p.value().data()[0], 0.9, 1e-7);
  EXPECT_NEAR(p.value().data()[1], -1.9, 1e-7);
  EXPECT_NEAR(p.value().data()[2], 0.4, 1e-7);
}

TEST(AdamTest, ClipReportsPreClipNormAndSkipsUntouched) {
  Var p(Tensor({2}, std::vector<double>{3.0, 4.0}), true);
  Var untouched(Tensor({2}, 7.0), true);
  Adam adam({p, untouched}, AdamOptions{0.01, 0.9, 0.999, 1e-8, 0.0, 1.0});
  Backward(Scale(SumSquares(p), 0.5));
  EXPECT_NEAR(adam.Step(), 5.0, 1e-12);
  EXPECT_EQ(untouched.value().data()[0], 7.0);
}

TEST(AdamTest, ConvergesOnQuadratic) {
  Var p(Tensor({4}, 3.0), true);
  Adam adam({p}, AdamOptions{0.05});
  for (int i = 0; i < 500; ++i) {
    adam.ZeroGrad();
    Backward(SumSquares(AddScalar(p, -1.0)));
    adam.Step();
  }
  for (double v : p.value().vec()) EXPECT_NEAR(v, 1.0, 1e-2);
}

}  // namespace
}  // namespace comix::nn
