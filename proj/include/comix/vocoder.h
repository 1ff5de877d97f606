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

#ifndef COMIX_VOCODER_H_
#define COMIX_VOCODER_H_

#include <memory>
#include <string>
#include <vector>

#include "comix/config.h"
#include "comix/nn/autograd.h"
#include "comix/nn/params.h"
#include "comix/util/rng.h"
#include "json.hpp"

namespace comix::vocoder {

using nn::Tensor;
using nn::Var;

struct FlowOutput {
  // [B, N, group]: early outputs first (in flow order), then the final
  // channels. Element count equals the input sample count.
  Var z;
  Var logdet_sum;
  std::vector<Var> log_s_terms;
  // log|det| contribution of every flow (1x1 conv + coupling), for checks.
  std::vector<double> flow_logdets;
};

// Waveglow: squeeze audio into groups, then a stack of invertible 1x1
// convolutions and affine couplings conditioned on upsampled mels.
class Waveglow {
 public:
  // Upsampling uses the window length as kernel and the hop as stride.
  Waveglow(const WaveglowConfig& config, const AudioConfig& audio, uint64_t seed);

  const WaveglowConfig& config() const { return config_; }
  const AudioConfig& audio() const { return audio_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  // mel [T, n_mels] -> conditioning [T * hop, n_mels]; the transposed conv
  // output is trimmed by win/2 at the front so frame t is centred on t*hop.
  Var Upsample(const Tensor& mel);

  // audio [B, S] with cond [B, S, n_mels]; S must be a multiple of group_size.
  FlowOutput Forward(const Tensor& audio, const Var& cond);
  // z as produced by Forward -> audio [B, S].
  Tensor Inverse(const Tensor& z, const Var& cond);

  // Synthesis from a mel [T, n_mels]: T * hop samples from z ~ N(0, sigma^2).
  // T * hop must be a multiple of group_size (see PaddedFrameCount).
  std::vector<double> Infer(const Tensor& mel, double sigma, Rng& rng);

  // Frame count >= frames whose sample count is divisible by the group size.
  int PaddedFrameCount(int frames) const;

  // Per-flow early output channels and remaining channels.
  const std::vector<int>& channels_per_flow() const { return channels_; }

  nlohmann::json Metadata() const;

 private:
  Var P(const std::string& name) { return params_.Get(name); }
  // Coupling network: returns [.., 2 * n_out] = (log_s, b).
  Var CouplingNet(int k, const Var& xa, const Var& cond);
  bool HasEarlyOutput(int k) const;

  WaveglowConfig config_;
  AudioConfig audio_;
  nn::ParameterStore params_;
  std::vector<int> channels_;  // channels entering flow k
};

// Mean per-element NLL for a batch: (sum z^2 / (2 sigma^2) - logdet) / numel.
Var NllLoss(const FlowOutput& out, double sigma);
double NllValue(const Tensor& z, double logdet_sum, double sigma);

struct VocoderTrainOptions {
  int steps = 200;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double grad_clip = 1.0;
  int batch = 1;
  uint64_t seed = 0;
  // Fixed segment start (frames) for every step instead of random crops.
  bool fixed_segment = false;
};

struct VocoderTrainReport {
  std::vector<double> losses;
  double wall_s = 0.0;
};

// mels[i] [T_i, n_mels] and audio[i] are the same clip.
VocoderTrainReport TrainWaveglow(Waveglow* model, const std::vector<Tensor>& mels,
                                 const std::vector<std::vector<double>>& audio, const VocoderTrainOptions& opt);

void SaveWaveglow(const std::string& path, const Waveglow& model, const nlohmann::json& extra);
struct LoadedWaveglow {
  std::unique_ptr<Waveglow> model;
  nlohmann::json metadata;
};
LoadedWaveglow LoadWaveglow(const std::string& path);

}  // namespace comix::vocoder

#endif  // COMIX_VOCODER_H_
