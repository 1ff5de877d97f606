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

#ifndef COMIX_CONFIG_H_
#define COMIX_CONFIG_H_

#include <string>
#include <vector>

#include "json.hpp"

namespace comix {

struct AudioConfig {
  int sample_rate = 22050;
  double frame_ms = 50.0;
  double hop_ms = 12.0;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double eps = 1e-5;
  // 0 means "same as the window length".
  int n_fft = 0;
  bool trim_silence = false;
  double trim_db = -40.0;

  // Round-half-to-even: 50 ms at 22050 Hz is 1102.5 samples -> 1102.
  int WinLength() const;
  int HopLength() const;
  int FftSize() const { return n_fft > 0 ? n_fft : WinLength(); }

  bool operator==(const AudioConfig&) const = default;
};

struct EncoderConfig {
  int embed_dim = 512;
  int n_conv = 3;
  int conv_filters = 512;
  int conv_kernel = 5;
  // Total over both directions; each direction gets half.
  int bilstm_units = 512;
  double dropout = 0.5;

  bool operator==(const EncoderConfig&) const = default;
};

struct DecoderConfig {
  int n_lstm = 2;
  int lstm_units = 1024;
  std::vector<int> prenet = {256, 256};
  double prenet_dropout = 0.5;
  int attn_dim = 128;
  int location_filters = 32;
  int location_kernel = 31;
  int postnet_layers = 5;
  int postnet_filters = 512;
  int postnet_kernel = 5;
  double postnet_dropout = 0.5;
  double gate_threshold = 0.5;
  // Weight of the single positive (final) frame in the stop loss.
  double stop_pos_weight = 5.0;
  int max_steps = 1000;
  // Guided attention: penalises attention mass far from the text/frame
  // diagonal during teacher forcing. 0 disables the term.
  double guided_attention_weight = 0.0;
  double guided_attention_sigma = 0.2;

  bool operator==(const DecoderConfig&) const = default;
};

struct SpeakerConfig {
  int embedding_dim = 512;

  bool operator==(const SpeakerConfig&) const = default;
};

struct WaveglowConfig {
  int n_flows = 12;
  int group_size = 8;
  int early_every = 4;
  int early_channels = 2;
  int wn_layers = 8;
  int wn_channels = 256;
  int wn_kernel = 3;
  double sigma_train = 1.0;
  double sigma_infer = 0.7;
  // "orthogonal" or "identity".
  std::string inv1x1_init = "orthogonal";
  // Training segment length in mel frames.
  int segment_frames = 64;

  bool operator==(const WaveglowConfig&) const = default;
};

struct TrainConfig {
  double lr_pretrain = 1e-3;
  double lr_finetune = 1e-4;
  double weight_decay = 1e-6;
  double grad_clip = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_frames = 4000;
  int max_steps = 100000;
  int eval_every = 100;
  int checkpoint_every = 1000;
  int patience = 10;
  // Share held out when a manifest has no VAL records; 0 disables validation.
  double val_fraction = 0.05;
  unsigned long long seed = 1234;

  bool operator==(const TrainConfig&) const = default;
};

struct PathsConfig {
  std::string work_dir = "work";
  std::string cache_dir = "";

  bool operator==(const PathsConfig&) const = default;
};

struct ToolkitConfig {
  std::string version = "1";
  AudioConfig audio;
  EncoderConfig encoder;
  DecoderConfig decoder;
  SpeakerConfig speaker;
  WaveglowConfig waveglow;
  TrainConfig train;
  PathsConfig paths;

  bool operator==(const ToolkitConfig&) const = default;
};

inline constexpr const char* kConfigVersion = "1";

// Strict parse: unknown keys and wrong types raise comix::Error naming the
// dotted key path. An empty document yields the defaults.
ToolkitConfig ConfigFromJson(const nlohmann::json& j);
nlohmann::json ConfigToJson(const ToolkitConfig& cfg);
nlohmann::json AudioToJson(const AudioConfig& audio);
AudioConfig AudioFromJson(const nlohmann::json& j);

ToolkitConfig LoadConfig(const std::string& path);
void SaveConfig(const ToolkitConfig& cfg, const std::string& path);

// --config value if non-empty, else $COMIX_CONFIG, else defaults.
ToolkitConfig ResolveConfig(const std::string& cli_path);

// Checks structural invariants (positive sizes, flow channel budget, ...).
void ValidateConfig(const ToolkitConfig& cfg);

}  // namespace comix

#endif  // COMIX_CONFIG_H_
