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

#include "comix/config.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "comix/error.h"

namespace comix {

using nlohmann::json;

int AudioConfig::WinLength() const {
  return static_cast<int>(std::nearbyint(frame_ms * 1e-3 * sample_rate));
}

int AudioConfig::HopLength() const {
  return static_cast<int>(std::nearbyint(hop_ms * 1e-3 * sample_rate));
}

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class SectionReader {
 public:
  SectionReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: '" + path_ + "' must be an object");
  }

  template <class T>
  void Get(const char* key, T* out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      *out = it->template get<T>();
    } catch (const json::exception&) {
      throw Error("config: wrong type for '" + Key(key) + "'");
    }
  }

  const json* Sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw Error("config: unknown key '" + Key(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

AudioConfig ReadAudio(const json& j, const std::string& path) {
  AudioConfig a;
  SectionReader r(j, path);
  r.Get("sample_rate", &a.sample_rate);
  r.Get("frame_ms", &a.frame_ms);
  r.Get("hop_ms", &a.hop_ms);
  r.Get("n_mels", &a.n_mels);
  r.Get("fmin", &a.fmin);
  r.Get("fmax", &a.fmax);
  r.Get("eps", &a.eps);
  r.Get("n_fft", &a.n_fft);
  r.Get("trim_silence", &a.trim_silence);
  r.Get("trim_db", &a.trim_db);
  r.Finish();
  return a;
}

EncoderConfig ReadEncoder(const json& j) {
  EncoderConfig e;
  SectionReader r(j, "encoder");
  r.Get("embed_dim", &e.embed_dim);
  r.Get("n_conv", &e.n_conv);
  r.Get("conv_filters", &e.conv_filters);
  r.Get("conv_kernel", &e.conv_kernel);
  r.Get("bilstm_units", &e.bilstm_units);
  r.Get("dropout", &e.dropout);
  r.Finish();
  return e;
}

DecoderConfig ReadDecoder(const json& j) {
  DecoderConfig d;
  SectionReader r(j, "decoder");
  r.Get("n_lstm", &d.n_lstm);
  r.Get("lstm_units", &d.lstm_units);
  r.Get("prenet", &d.prenet);
  r.Get("prenet_dropout", &d.prenet_dropout);
  r.Get("attn_dim", &d.attn_dim);
  r.Get("location_filters", &d.location_filters);
  r.Get("location_kernel", &d.location_kernel);
  r.Get("postnet_layers", &d.postnet_layers);
  r.Get("postnet_filters", &d.postnet_filters);
  r.Get("postnet_kernel", &d.postnet_kernel);
  r.Get("postnet_dropout", &d.postnet_dropout);
  r.Get("gate_threshold", &d.gate_threshold);
  r.Get("stop_pos_weight", &d.stop_pos_weight);
  r.Get("max_steps", &d.max_steps);
  r.Get("guided_attention_weight", &d.guided_attention_weight);
  r.Get("guided_attention_sigma", &d.guided_attention_sigma);
  r.Finish();
  return d;
}

SpeakerConfig ReadSpeaker(const json& j) {
  SpeakerConfig s;
  SectionReader r(j, "speaker");
  r.Get("embedding_dim", &s.embedding_dim);
  r.Finish();
  return s;
}

WaveglowConfig ReadWaveglow(const json& j) {
  WaveglowConfig w;
  SectionReader r(j, "waveglow");
  r.Get("n_flows", &w.n_flows);
  r.Get("group_size", &w.group_size);
  r.Get("early_every", &w.early_every);
  r.Get("early_channels", &w.early_channels);
  r.Get("wn_layers", &w.wn_layers);
  r.Get("wn_channels", &w.wn_channels);
  r.Get("wn_kernel", &w.wn_kernel);
  r.Get("sigma_train", &w.sigma_train);
  r.Get("sigma_infer", &w.sigma_infer);
  r.Get("inv1x1_init", &w.inv1x1_init);
  r.Get("segment_frames", &w.segment_frames);
  r.Finish();
  return w;
}

TrainConfig ReadTrain(const json& j) {
  TrainConfig t;
  SectionReader r(j, "train");
  r.Get("lr_pretrain", &t.lr_pretrain);
  r.Get("lr_finetune", &t.lr_finetune);
  r.Get("weight_decay", &t.weight_decay);
  r.Get("grad_clip", &t.grad_clip);
  r.Get("adam_beta1", &t.adam_beta1);
  r.Get("adam_beta2", &t.adam_beta2);
  r.Get("adam_eps", &t.adam_eps);
  r.Get("batch_frames", &t.batch_frames);
  r.Get("max_steps", &t.max_steps);
  r.Get("eval_every", &t.eval_every);
  r.Get("checkpoint_every", &t.checkpoint_every);
  r.Get("patience", &t.patience);
  r.Get("val_fraction", &t.val_fraction);
  r.Get("seed", &t.seed);
  r.Finish();
  return t;
}

PathsConfig ReadPaths(const json& j) {
  PathsConfig p;
  SectionReader r(j, "paths");
  r.Get("work_dir", &p.work_dir);
  r.Get("cache_dir", &p.cache_dir);
  r.Finish();
  return p;
}

}  // namespace

AudioConfig AudioFromJson(const json& j) { return ReadAudio(j, "audio"); }

json AudioToJson(const AudioConfig& a) {
  return json{{"sample_rate", a.sample_rate}, {"frame_ms", a.frame_ms},
              {"hop_ms", a.hop_ms},           {"n_mels", a.n_mels},
              {"fmin", a.fmin},               {"fmax", a.fmax},
              {"eps", a.eps},                 {"n_fft", a.n_fft},
              {"trim_silence", a.trim_silence}, {"trim_db", a.trim_db}};
}

ToolkitConfig ConfigFromJson(const json& j) {
  ToolkitConfig cfg;
  if (j.is_null()) return cfg;
  SectionReader r(j, "");
  if (!j.empty()) {
    if (!j.contains("version")) throw Error("config: missing required key 'version'");
    r.Get("version", &cfg.version);
    if (cfg.version != kConfigVersion) {
      throw Error("config: unsupported version '" + cfg.version + "'");
    }
  }
  if (const json* s = r.Sub("audio")) cfg.audio = ReadAudio(*s, "audio");
  if (const json* s = r.Sub("encoder")) cfg.encoder = ReadEncoder(*s);
  if (const json* s = r.Sub("decoder")) cfg.decoder = ReadDecoder(*s);
  if (const json* s = r.Sub("speaker")) cfg.speaker = ReadSpeaker(*s);
  if (const json* s = r.Sub("waveglow")) cfg.waveglow = ReadWaveglow(*s);
  if (const json* s = r.Sub("train")) cfg.train = ReadTrain(*s);
  if (const json* s = r.Sub("paths")) cfg.paths = ReadPaths(*s);
  r.Finish();
  ValidateConfig(cfg);
  return cfg;
}

json ConfigToJson(const ToolkitConfig& c) {
  json j;
  j["version"] = c.version;
  j["audio"] = AudioToJson(c.audio);
  const auto& e = c.encoder;
  j["encoder"] = {{"embed_dim", e.embed_dim},       {"n_conv", e.n_conv},
                  {"conv_filters", e.conv_filters}, {"conv_kernel", e.conv_kernel},
                  {"bilstm_units", e.bilstm_units}, {"dropout", e.dropout}};
  const auto& d = c.decoder;
  j["decoder"] = {{"n_lstm", d.n_lstm},
                  {"lstm_units", d.lstm_units},
                  {"prenet", d.prenet},
                  {"prenet_dropout", d.prenet_dropout},
                  {"attn_dim", d.attn_dim},
                  {"location_filters", d.location_filters},
                  {"location_kernel", d.location_kernel},
                  {"postnet_layers", d.postnet_layers},
                  {"postnet_filters", d.postnet_filters},
                  {"postnet_kernel", d.postnet_kernel},
                  {"postnet_dropout", d.postnet_dropout},
                  {"gate_threshold", d.gate_threshold},
                  {"stop_pos_weight", d.stop_pos_weight},
                  {"max_steps", d.max_steps},
                  {"guided_attention_weight", d.guided_attention_weight},
                  {"guided_attention_sigma", d.guided_attention_sigma}};
  j["speaker"] = {{"embedding_dim", c.speaker.embedding_dim}};
  const auto& w = c.waveglow;
  j["waveglow"] = {{"n_flows", w.n_flows},         {"group_size", w.group_size},
                   {"early_every", w.early_every}, {"early_channels", w.early_channels},
                   {"wn_layers", w.wn_layers},     {"wn_channels", w.wn_channels},
                   {"wn_kernel", w.wn_kernel},     {"sigma_train", w.sigma_train},
                   {"sigma_infer", w.sigma_infer}, {"inv1x1_init", w.inv1x1_init},
                   {"segment_frames", w.segment_frames}};
  const auto& t = c.train;
  j["train"] = {{"lr_pretrain", t.lr_pretrain},
                {"lr_finetune", t.lr_finetune},
                {"weight_decay", t.weight_decay},
                {"grad_clip", t.grad_clip},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps},
                {"batch_frames", t.batch_frames},
                {"max_steps", t.max_steps},
                {"eval_every", t.eval_every},
                {"checkpoint_every", t.checkpoint_every},
                {"patience", t.patience},
                {"val_fraction", t.val_fraction},
                {"seed", t.seed}};
  j["paths"] = {{"work_dir", c.paths.work_dir}, {"cache_dir", c.paths.cache_dir}};
  return j;
}

ToolkitConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return ToolkitConfig{};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("config: parse error in '" + path + "': " + e.what());
  }
  return ConfigFromJson(j);
}

void SaveConfig(const ToolkitConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("config: cannot write '" + path + "'");
  out << ConfigToJson(cfg).dump(2) << "\n";
}

ToolkitConfig ResolveConfig(const std::string& cli_path) {
  if (!cli_path.empty()) return LoadConfig(cli_path);
  if (const char* env = std::getenv("COMIX_CONFIG"); env && *env) return LoadConfig(env);
  return ToolkitConfig{};
}

void ValidateConfig(const ToolkitConfig& c) {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw Error("config: '" + key + "' " + what);
  };
  const auto& a = c.audio;
  require(a.sample_rate > 0, "audio.sample_rate", "must be positive");
  require(a.n_mels > 0, "audio.n_mels", "must be positive");
  require(a.HopLength() > 0, "audio.hop_ms", "gives an empty hop");
  require(a.WinLength() >= a.HopLength(), "audio.frame_ms", "must cover one hop");
  require(a.FftSize() >= a.WinLength(), "audio.n_fft", "must be >= window length");
  require(a.eps > 0, "audio.eps", "must be positive");
  require(a.fmax > a.fmin && a.fmax <= a.sample_rate / 2.0, "audio.fmax",
          "must lie in (fmin, sample_rate/2]");
  const auto& e = c.encoder;
  require(e.embed_dim > 0 && e.conv_filters > 0 && e.n_conv >= 0, "encoder", "sizes must be positive");
  require(e.conv_kernel % 2 == 1, "encoder.conv_kernel", "must be odd");
  require(e.bilstm_units > 0 && e.bilstm_units % 2 == 0, "encoder.bilstm_units",
          "must be positive and even");
  const auto& d = c.decoder;
  require(d.n_lstm == 2, "decoder.n_lstm", "must be 2 (attention LSTM + decoder LSTM)");
  require(!d.prenet.empty(), "decoder.prenet", "needs at least one layer");
  require(d.location_kernel % 2 == 1, "decoder.location_kernel", "must be odd");
  require(d.postnet_kernel % 2 == 1, "decoder.postnet_kernel", "must be odd");
  require(d.postnet_layers >= 1, "decoder.postnet_layers", "must be >= 1");
  require(d.max_steps >= 1, "decoder.max_steps", "must be >= 1");
  require(d.stop_pos_weight > 0, "decoder.stop_pos_weight", "must be positive");
  require(d.guided_attention_weight >= 0, "decoder.guided_attention_weight", "must be >= 0");
  require(d.guided_attention_sigma > 0, "decoder.guided_attention_sigma", "must be positive");
  const auto& w = c.waveglow;
  require(w.group_size >= 2, "waveglow.group_size", "must be >= 2");
  require(w.n_flows >= 1 && w.early_every >= 1, "waveglow.n_flows", "must be positive");
  int n_early = (w.n_flows - 1) / w.early_every;
  require(w.group_size - n_early * w.early_channels >= 2, "waveglow.early_channels",
          "exhausts the channel budget");
  require(w.wn_kernel % 2 == 1, "waveglow.wn_kernel", "must be odd");
  require(w.inv1x1_init == "orthogonal" || w.inv1x1_init == "identity",
          "waveglow.inv1x1_init", "must be 'orthogonal' or 'identity'");
  // 0 disables validation.
  require(c.train.val_fraction >= 0 && c.train.val_fraction < 0.5, "train.val_fraction",
          "must lie in [0, 0.5)");
}

}  // namespace comix
