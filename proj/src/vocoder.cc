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

#include "comix/vocoder.h"

#include <chrono>
#include <cmath>
#include <numeric>

#include "comix/error.h"

namespace comix::vocoder {

using nlohmann::json;
namespace ag = comix::nn;

namespace {

Tensor OrthogonalInit(int n, Rng& rng) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(n));
  for (auto& r : rows) {
    for (double& v : r) v = rng.Normal();
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0.0;
      for (int k = 0; k < n; ++k) dot += rows[i][k] * rows[j][k];
      for (int k = 0; k < n; ++k) rows[i][k] -= dot * rows[j][k];
    }
    double norm = 0.0;
    for (double v : rows[i]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : rows[i]) v /= norm;
  }
  Tensor w({n, n});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) w[static_cast<size_t>(i) * n + j] = rows[i][j];
  }
  int sign = 1;
  nn::LogAbsDeterminant(w, &sign);
  if (sign < 0) {
    for (int j = 0; j < n; ++j) w[j] = -w[j];
  }
  return w;
}

json WaveglowToJson(const WaveglowConfig& c) {
  ToolkitConfig tk;
  tk.waveglow = c;
  return ConfigToJson(tk)["waveglow"];
}

WaveglowConfig WaveglowFromJson(const json& j) {
  return ConfigFromJson({{"version", kConfigVersion}, {"waveglow", j}}).waveglow;
}

}  // namespace

Waveglow::Waveglow(const WaveglowConfig& config, const AudioConfig& audio, uint64_t seed)
    : config_(config), audio_(audio) {
  const int g = config_.group_size;
  const int M = audio_.n_mels;
  const int Wc = config_.wn_channels;
  const int win = audio_.WinLength();
  const int hop = audio_.HopLength();
  if (g < 2 || config_.n_flows < 1 || Wc < 1 || config_.wn_layers < 1) throw Error("waveglow: bad sizes");
  if (config_.wn_kernel % 2 == 0) throw Error("waveglow.wn_kernel must be odd");
  if ((win + 1) / 2 < hop) throw Error("waveglow: window must be at least twice the hop");
  Rng init(seed ^ 0xf10fULL);

  int c = g;
  for (int k = 0; k < config_.n_flows; ++k) {
    if (HasEarlyOutput(k)) c -= config_.early_channels;
    if (c < 2) throw Error("waveglow: early outputs exhaust the channel budget");
    channels_.push_back(c);
  }

  params_.AddParameter("upsample.weight", nn::XavierUniform({M, win, M}, M * win, M * win, init));
  params_.AddParameter("upsample.bias", Tensor({M}, 0.0));
  for (int k = 0; k < config_.n_flows; ++k) {
    const std::string p = "flow" + std::to_string(k);
    const int C = channels_[k];
    const int n_half = C / 2;
    const int n_out = C - n_half;
    Tensor w = config_.inv1x1_init == "identity" ? Tensor({C, C}, 0.0) : OrthogonalInit(C, init);
    if (config_.inv1x1_init == "identity") {
      for (int i = 0; i < C; ++i) w[static_cast<size_t>(i) * C + i] = 1.0;
    } else if (config_.inv1x1_init != "orthogonal") {
      throw Error("waveglow.inv1x1_init must be 'orthogonal' or 'identity'");
    }
    params_.AddParameter(p + ".inv1x1.weight", std::move(w));
    params_.AddParameter(p + ".wn.start.weight", nn::XavierUniform({Wc, n_half}, n_half, Wc, init));
    params_.AddParameter(p + ".wn.start.bias", Tensor({Wc}, 0.0));
    for (int i = 0; i < config_.wn_layers; ++i) {
      const std::string l = std::to_string(i);
      const int K = config_.wn_kernel;
      params_.AddParameter(p + ".wn.in" + l + ".weight", nn::XavierUniform({2 * Wc, Wc, K}, Wc * K, 2 * Wc * K, init));
      params_.AddParameter(p + ".wn.in" + l + ".bias", Tensor({2 * Wc}, 0.0));
      params_.AddParameter(p + ".wn.cond" + l + ".weight", nn::XavierUniform({2 * Wc, M * g}, M * g, 2 * Wc, init));
      params_.AddParameter(p + ".wn.cond" + l + ".bias", Tensor({2 * Wc}, 0.0));
      const int rs = i + 1 < config_.wn_layers ? 2 * Wc : Wc;
      params_.AddParameter(p + ".wn.res_skip" + l + ".weight", nn::XavierUniform({rs, Wc}, Wc, rs, init));
      params_.AddParameter(p + ".wn.res_skip" + l + ".bias", Tensor({rs}, 0.0));
    }
    params_.AddParameter(p + ".wn.end.weight", Tensor({2 * n_out, Wc}, 0.0));
    params_.AddParameter(p + ".wn.end.bias", Tensor({2 * n_out}, 0.0));
  }
}

bool Waveglow::HasEarlyOutput(int k) const {
  return config_.early_every > 0 && config_.early_channels > 0 && k > 0 && k % config_.early_every == 0;
}

int Waveglow::PaddedFrameCount(int frames) const {
  const int hop = audio_.HopLength();
  const int step = config_.group_size / std::gcd(config_.group_size, hop);
  return (frames + step - 1) / step * step;
}

Var Waveglow::Upsample(const Tensor& mel) {
  if (mel.rank() != 2 || mel.dim(1) != audio_.n_mels || mel.dim(0) < 1) {
    throw Error("upsample: mel must be [T, " + std::to_string(audio_.n_mels) + "], got " +
                nn::ShapeString(mel.shape()));
  }
  const int hop = audio_.HopLength();
  const int T = mel.dim(0);
  Var b = P("upsample.bias");
  Var full = ag::ConvTranspose1d(ag::Constant(mel), P("upsample.weight"), &b, hop);
  return ag::SliceFirst(full, audio_.WinLength() / 2, T * hop);
}

Var Waveglow::CouplingNet(int k, const Var& xa, const Var& cond) {
  const std::string p = "flow" + std::to_string(k) + ".wn.";
  const int Wc = config_.wn_channels;
  Var sb = P(p + "start.bias");
  Var h = ag::Linear(xa, P(p + "start.weight"), &sb);
  Var skip;
  for (int i = 0; i < config_.wn_layers; ++i) {
    const std::string l = std::to_string(i);
    Var ib = P(p + "in" + l + ".bias");
    Var cb = P(p + "cond" + l + ".bias");
    Var rb = P(p + "res_skip" + l + ".bias");
    Var in = ag::Add(ag::Conv1d(h, P(p + "in" + l + ".weight"), &ib, 1 << i),
                     ag::Linear(cond, P(p + "cond" + l + ".weight"), &cb));
    Var acts = ag::Mul(ag::Tanh(ag::SliceLast(in, 0, Wc)), ag::Sigmoid(ag::SliceLast(in, Wc, Wc)));
    Var rs = ag::Linear(acts, P(p + "res_skip" + l + ".weight"), &rb);
    Var s;
    if (i + 1 < config_.wn_layers) {
      h = ag::Add(h, ag::SliceLast(rs, 0, Wc));
      s = ag::SliceLast(rs, Wc, Wc);
    } else {
      s = rs;
    }
    skip = skip.defined() ? ag::Add(skip, s) : s;
  }
  Var eb = P(p + "end.bias");
  return ag::Linear(skip, P(p + "end.weight"), &eb);
}

FlowOutput Waveglow::Forward(const Tensor& audio, const Var& cond) {
  const int g = config_.group_size;
  const int M = audio_.n_mels;
  if (audio.rank() != 2) throw Error("waveglow: audio must be [B, S]");
  const int B = audio.dim(0), S = audio.dim(1);
  if (S % g != 0) {
    throw Error("waveglow: segment length " + std::to_string(S) + " is not a multiple of group size " +
                std::to_string(g));
  }
  if (cond.value().rank() != 3 || cond.dim(0) != B || cond.dim(1) != S || cond.dim(2) != M) {
    throw Error("waveglow: conditioning " + nn::ShapeString(cond.shape()) + " does not cover audio " +
                nn::ShapeString(audio.shape()));
  }
  const int N = S / g;
  Var condg = ag::Reshape(cond, {B, N, g * M});
  Var x = ag::Constant(audio.Reshaped({B, N, g}));
  FlowOutput out;
  std::vector<Var> z_parts;
  Var logdet;
  for (int k = 0; k < config_.n_flows; ++k) {
    const std::string p = "flow" + std::to_string(k);
    if (HasEarlyOutput(k)) {
      const int C = x.dim(2);
      z_parts.push_back(ag::SliceLast(x, 0, config_.early_channels));
      x = ag::SliceLast(x, config_.early_channels, C - config_.early_channels);
    }
    const int C = channels_[k];
    const int n_half = C / 2, n_out = C - n_half;
    Var w = P(p + ".inv1x1.weight");
    x = ag::Linear(x, w, nullptr);
    Var ld_w = ag::Scale(ag::LogAbsDet(w), static_cast<double>(B) * N);
    Var xa = ag::SliceLast(x, 0, n_half);
    Var xb = ag::SliceLast(x, n_half, n_out);
    Var st = CouplingNet(k, xa, condg);
    Var log_s = ag::SliceLast(st, 0, n_out);
    Var shift = ag::SliceLast(st, n_out, n_out);
    xb = ag::Add(ag::Mul(ag::Exp(log_s), xb), shift);
    x = ag::Concat({xa, xb});
    Var ld_s = ag::Sum(log_s);
    out.log_s_terms.push_back(log_s);
    out.flow_logdets.push_back(ld_w.value().item() + ld_s.value().item());
    Var ld = ag::Add(ld_w, ld_s);
    logdet = logdet.defined() ? ag::Add(logdet, ld) : ld;
  }
  z_parts.push_back(x);
  out.z = ag::Concat(z_parts);
  out.logdet_sum = logdet;
  return out;
}

Tensor Waveglow::Inverse(const Tensor& z, const Var& cond) {
  nn::NoGradGuard no_grad;
  const int g = config_.group_size;
  const int M = audio_.n_mels;
  if (z.rank() != 3 || z.dim(2) != g) throw Error("waveglow: z must be [B, N, group]");
  const int B = z.dim(0), N = z.dim(1);
  if (cond.value().rank() != 3 || cond.dim(0) != B || cond.dim(1) != N * g || cond.dim(2) != M) {
    throw Error("waveglow: conditioning " + nn::ShapeString(cond.shape()) + " does not cover latent " +
                nn::ShapeString(z.shape()));
  }
  Var condg = ag::Reshape(cond, {B, N, g * M});
  std::vector<int> early_offset(config_.n_flows, -1);
  int offset = 0;
  for (int k = 0; k < config_.n_flows; ++k) {
    if (HasEarlyOutput(k)) {
      early_offset[k] = offset;
      offset += config_.early_channels;
    }
  }
  Var zv = ag::Constant(z);
  Var x = ag::SliceLast(zv, offset, g - offset);
  for (int k = config_.n_flows - 1; k >= 0; --k) {
    const std::string p = "flow" + std::to_string(k);
    const int C = channels_[k];
    const int n_half = C / 2, n_out = C - n_half;
    Var xa = ag::SliceLast(x, 0, n_half);
    Var xb = ag::SliceLast(x, n_half, n_out);
    Var st = CouplingNet(k, xa, condg);
    Var log_s = ag::SliceLast(st, 0, n_out);
    Var shift = ag::SliceLast(st, n_out, n_out);
    xb = ag::Mul(ag::Sub(xb, shift), ag::Exp(ag::Scale(log_s, -1.0)));
    x = ag::Concat({xa, xb});
    Tensor winv;
    if (!nn::Invert(P(p + ".inv1x1.weight").value(), &winv)) throw Error("waveglow: singular 1x1 convolution in " + p);
    x = ag::Linear(x, ag::Constant(winv), nullptr);
    if (early_offset[k] >= 0) x = ag::Concat({ag::SliceLast(zv, early_offset[k], config_.early_channels), x});
  }
  return x.value().Reshaped({B, N * g});
}

std::vector<double> Waveglow::Infer(const Tensor& mel, double sigma, Rng& rng) {
  nn::NoGradGuard no_grad;
  const int g = config_.group_size;
  const int S = mel.dim(0) * audio_.HopLength();
  if (S % g != 0) {
    throw Error("waveglow: " + std::to_string(mel.dim(0)) + " frames give " + std::to_string(S) +
                " samples, not a multiple of group size " + std::to_string(g));
  }
  Var cond = ag::Reshape(Upsample(mel), {1, S, audio_.n_mels});
  Tensor z({1, S / g, g});
  for (double& v : z.vec()) v = sigma * rng.Normal();
  return Inverse(z, cond).vec();
}

json Waveglow::Metadata() const {
  return {{"model", "waveglow"}, {"waveglow", WaveglowToJson(config_)}, {"audio", AudioToJson(audio_)}};
}

Var NllLoss(const FlowOutput& out, double sigma) {
  if (!std::isfinite(out.logdet_sum.value().item())) throw Error("waveglow: non-finite log-determinant");
  const double n = static_cast<double>(out.z.value().numel());
  Var sq = ag::Scale(ag::SumSquares(out.z), 1.0 / (2.0 * sigma * sigma));
  return ag::Scale(ag::Sub(sq, out.logdet_sum), 1.0 / n);
}

double NllValue(const Tensor& z, double logdet_sum, double sigma) {
  if (!std::isfinite(logdet_sum)) throw Error("waveglow: non-finite log-determinant");
  double s = 0.0;
  for (double v : z.vec()) s += v * v;
  return (s / (2.0 * sigma * sigma) - logdet_sum) / static_cast<double>(z.numel());
}

VocoderTrainReport TrainWaveglow(Waveglow* model, const std::vector<Tensor>& mels,
                                 const std::vector<std::vector<double>>& audio, const VocoderTrainOptions& opt) {
  if (mels.empty() || mels.size() != audio.size()) throw Error("vocoder training needs paired mels and audio");
  const auto t0 = std::chrono::steady_clock::now();
  const int hop = model->audio().HopLength();
  const int M = model->audio().n_mels;
  const int g = model->config().group_size;
  const int unit = g / std::gcd(g, hop);
  std::vector<Var> params;
  for (const auto& n : model->params().ParameterNames()) params.push_back(model->params().Get(n));
  nn::AdamOptions ao;
  ao.lr = opt.lr;
  ao.weight_decay = opt.weight_decay;
  ao.grad_clip = opt.grad_clip;
  nn::Adam adam(params, ao);
  Rng rng(opt.seed);
  VocoderTrainReport report;
  for (int step = 0; step < opt.steps; ++step) {
    Var loss;
    for (int b = 0; b < opt.batch; ++b) {
      const size_t i = opt.fixed_segment ? static_cast<size_t>(b) % mels.size() : rng.Below(mels.size());
      const int T = mels[i].dim(0);
      int F = std::min(model->config().segment_frames, T) / unit * unit;
      if (F < 1) throw Error("vocoder training clip shorter than one segment unit");
      const int f0 = opt.fixed_segment ? 0 : static_cast<int>(rng.Below(static_cast<uint64_t>(T - F + 1)));
      Tensor seg_mel({F, M});
      std::copy(mels[i].data() + static_cast<size_t>(f0) * M, mels[i].data() + static_cast<size_t>(f0 + F) * M,
                seg_mel.data());
      const int S = F * hop;
      Tensor seg_audio({1, S}, 0.0);
      for (int s = 0; s < S; ++s) {
        const size_t src = static_cast<size_t>(f0) * hop + s;
        if (src < audio[i].size()) seg_audio[s] = audio[i][src];
      }
      Var cond = ag::Reshape(model->Upsample(seg_mel), {1, S, M});
      FlowOutput fo = model->Forward(seg_audio, cond);
      Var l = NllLoss(fo, model->config().sigma_train);
      loss = loss.defined() ? ag::Add(loss, l) : l;
    }
    loss = ag::Scale(loss, 1.0 / opt.batch);
    adam.ZeroGrad();
    nn::Backward(loss);
    adam.Step();
    report.losses.push_back(loss.value().item());
  }
  report.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void SaveWaveglow(const std::string& path, const Waveglow& model, const json& extra) {
  json meta = extra.is_object() ? extra : json::object();
  const json model_meta = model.Metadata();
  for (auto& [k, v] : model_meta.items()) meta[k] = v;
  nn::SaveCheckpoint(path, model.params(), meta);
}

LoadedWaveglow LoadWaveglow(const std::string& path) {
  nn::Checkpoint ck = nn::LoadCheckpoint(path);
  if (ck.metadata.value("model", "") != "waveglow") throw Error(path + " is not a waveglow checkpoint");
  LoadedWaveglow out;
  out.model = std::make_unique<Waveglow>(WaveglowFromJson(ck.metadata.at("waveglow")),
                                         AudioFromJson(ck.metadata.at("audio")), 0);
  nn::LoadStrict(ck, &out.model->params());
  out.metadata = std::move(ck.metadata);
  return out;
}

}  // namespace comix::vocoder
