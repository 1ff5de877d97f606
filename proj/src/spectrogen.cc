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

#include "comix/spectrogen.h"

#include <algorithm>
#include <cmath>

#include "comix/error.h"
#include "comix/util/utf8.h"

namespace comix::spectrogen {

using nlohmann::json;
namespace ag = comix::nn;

// ---- vocabulary ------------------------------------------------------------------

CharVocabulary::CharVocabulary(std::string name, std::vector<std::string> symbols)
    : name_(std::move(name)), symbols_(std::move(symbols)) {
  if (symbols_.size() < 2 || symbols_[kPad] != "<pad>" || symbols_[kEos] != "<eos>") {
    throw Error("vocabulary must start with <pad>, <eos>");
  }
  for (size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<int>(i)).second) {
      throw Error("duplicate vocabulary symbol '" + symbols_[i] + "'");
    }
  }
}

CharVocabulary CharVocabulary::Devanagari() {
  std::vector<std::string> s = {"<pad>", "<eos>", " ", ".", ",", "?", "!"};
  for (char32_t c = 0x0900; c <= 0x097F; ++c) s.push_back(utf8::Encode(c));
  return CharVocabulary("devanagari", std::move(s));
}

CharVocabulary CharVocabulary::Roman() {
  std::vector<std::string> s = {"<pad>", "<eos>", " ", ".", ",", "?", "!"};
  for (char c = 'a'; c <= 'z'; ++c) s.emplace_back(1, c);
  for (char c = 'A'; c <= 'Z'; ++c) s.emplace_back(1, c);
  for (char c = '0'; c <= '9'; ++c) s.emplace_back(1, c);
  return CharVocabulary("roman", std::move(s));
}

std::vector<int> CharVocabulary::Encode(std::string_view text, bool append_eos) const {
  std::vector<int> ids;
  for (char32_t c : utf8::Decode(text)) {
    std::string sym = utf8::Encode(c);
    auto it = index_.find(sym);
    if (it == index_.end() || it->second < 2) {
      throw Error("character '" + sym + "' not in " + name_ + " vocabulary");
    }
    ids.push_back(it->second);
  }
  if (append_eos) ids.push_back(kEos);
  return ids;
}

std::string CharVocabulary::Decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= size()) throw Error("out-of-vocabulary id " + std::to_string(id));
    if (id >= 2) out += symbols_[id];
  }
  return out;
}

json CharVocabulary::ToJson() const { return {{"name", name_}, {"symbols", symbols_}}; }

CharVocabulary CharVocabulary::FromJson(const json& j) {
  return CharVocabulary(j.at("name").get<std::string>(), j.at("symbols").get<std::vector<std::string>>());
}

// ---- config ------------------------------------------------------------------

json TacotronConfigToJson(const TacotronConfig& c) {
  ToolkitConfig tk;
  tk.encoder = c.encoder;
  tk.decoder = c.decoder;
  json full = ConfigToJson(tk);
  return {{"encoder", full["encoder"]},
          {"decoder", full["decoder"]},
          {"n_mels", c.n_mels},
          {"multi_speaker", c.multi_speaker},
          {"speaker_dim", c.speaker_dim},
          {"pad_value", c.pad_value}};
}

TacotronConfig TacotronConfigFromJson(const json& j) {
  ToolkitConfig tk = ConfigFromJson({{"version", kConfigVersion}, {"encoder", j.at("encoder")}, {"decoder", j.at("decoder")}});
  TacotronConfig c;
  c.encoder = tk.encoder;
  c.decoder = tk.decoder;
  c.n_mels = j.at("n_mels").get<int>();
  c.multi_speaker = j.at("multi_speaker").get<bool>();
  c.speaker_dim = j.at("speaker_dim").get<int>();
  c.pad_value = j.at("pad_value").get<double>();
  return c;
}

TacotronConfig TacotronConfigFrom(const ToolkitConfig& cfg, bool multi_speaker) {
  TacotronConfig c;
  c.encoder = cfg.encoder;
  c.decoder = cfg.decoder;
  c.n_mels = cfg.audio.n_mels;
  c.multi_speaker = multi_speaker;
  c.speaker_dim = cfg.speaker.embedding_dim;
  c.pad_value = std::log(cfg.audio.eps);
  return c;
}

// ---- batches ---------------------------------------------------------------------

TextBatch TextBatch::FromSequences(const std::vector<std::vector<int>>& seqs) {
  TextBatch tb;
  tb.batch = static_cast<int>(seqs.size());
  for (const auto& s : seqs) {
    if (s.empty()) throw Error("empty input sequence");
    tb.max_length = std::max(tb.max_length, static_cast<int>(s.size()));
    tb.lengths.push_back(static_cast<int>(s.size()));
  }
  tb.ids.assign(static_cast<size_t>(tb.batch) * tb.max_length, CharVocabulary::kPad);
  for (int b = 0; b < tb.batch; ++b) {
    std::copy(seqs[b].begin(), seqs[b].end(), tb.ids.begin() + static_cast<size_t>(b) * tb.max_length);
  }
  return tb;
}

MelBatch MelBatch::FromMels(const std::vector<Tensor>& mels, double pad_value) {
  MelBatch mb;
  mb.batch = static_cast<int>(mels.size());
  if (mels.empty()) throw Error("empty mel batch");
  const int M = mels[0].dim(1);
  for (const auto& m : mels) {
    if (m.rank() != 2 || m.dim(1) != M || m.dim(0) < 1) throw Error("mel target must be [T>=1, n_mels]");
    mb.max_frames = std::max(mb.max_frames, m.dim(0));
    mb.lengths.push_back(m.dim(0));
  }
  const int T = mb.max_frames;
  mb.mels = Tensor(nn::Shape{mb.batch, T, M}, pad_value);
  mb.mask.assign(static_cast<size_t>(mb.batch) * T, 0.0);
  mb.stops = Tensor(nn::Shape{mb.batch, T}, 0.0);
  for (int b = 0; b < mb.batch; ++b) {
    const Tensor& m = mels[b];
    std::copy(m.data(), m.data() + m.numel(), mb.mels.data() + static_cast<size_t>(b) * T * M);
    for (int t = 0; t < m.dim(0); ++t) mb.mask[static_cast<size_t>(b) * T + t] = 1.0;
    mb.stops[static_cast<size_t>(b) * T + m.dim(0) - 1] = 1.0;
  }
  return mb;
}

// ---- outputs ---------------------------------------------------------------------

namespace {

Tensor ItemRows(const Tensor& t, int b, int rows) {
  const int T = t.dim(1);
  const int W = t.rank() == 3 ? t.dim(2) : 1;
  Tensor out(nn::Shape{rows, W});
  const double* src = t.data() + static_cast<size_t>(b) * T * W;
  std::copy(src, src + static_cast<size_t>(rows) * W, out.data());
  return out;
}

std::vector<double> LengthMask(const std::vector<int>& lengths, int max_len) {
  std::vector<double> mask(lengths.size() * max_len, 0.0);
  for (size_t b = 0; b < lengths.size(); ++b) {
    for (int t = 0; t < lengths[b] && t < max_len; ++t) mask[b * max_len + t] = 1.0;
  }
  return mask;
}

}  // namespace

Tensor SpectrogenOutput::MelPost(int b) const { return ItemRows(mel_post.value(), b, frames[b]); }
Tensor SpectrogenOutput::MelPre(int b) const { return ItemRows(mel_pre.value(), b, frames[b]); }

std::vector<double> SpectrogenOutput::StopProbs(int b) const {
  const Tensor& g = gate_logits.value();
  const int T = g.dim(1);
  std::vector<double> p(frames[b]);
  for (int t = 0; t < frames[b]; ++t) p[t] = 1.0 / (1.0 + std::exp(-g[static_cast<size_t>(b) * T + t]));
  return p;
}

Tensor SpectrogenOutput::Attention(int b, int input_length) const {
  const int T = attention.dim(1);
  const int L = attention.dim(2);
  Tensor out(nn::Shape{frames[b], input_length});
  for (int t = 0; t < frames[b]; ++t) {
    const double* src = attention.data() + (static_cast<size_t>(b) * T + t) * L;
    std::copy(src, src + input_length, out.data() + static_cast<size_t>(t) * input_length);
  }
  return out;
}

// ---- model -----------------------------------------------------------------------

Tacotron2::Tacotron2(const TacotronConfig& config, CharVocabulary vocab, uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), rng_(seed) {
  const auto& e = config_.encoder;
  const auto& d = config_.decoder;
  if (e.bilstm_units % 2 != 0) throw Error("encoder.bilstm_units must be even");
  if (e.conv_kernel % 2 == 0 || d.postnet_kernel % 2 == 0 || d.location_kernel % 2 == 0) {
    throw Error("convolution kernels must be odd");
  }
  if (d.n_lstm != 2) throw Error("decoder.n_lstm must be 2");
  if (d.prenet.empty()) throw Error("decoder.prenet must have at least one layer");
  enc_dim_ = e.bilstm_units;
  const int H = e.bilstm_units / 2;
  const int M = config_.n_mels;
  Rng init(seed ^ 0x5eedULL);

  auto conv = [&](const std::string& prefix, int cin, int cout, int k) {
    params_.AddParameter(prefix + ".weight", nn::XavierUniform({cout, cin, k}, cin * k, cout * k, init));
    params_.AddParameter(prefix + ".bias", Tensor({cout}, 0.0));
    params_.AddParameter(prefix + ".bn.gamma", Tensor({cout}, 1.0));
    params_.AddParameter(prefix + ".bn.beta", Tensor({cout}, 0.0));
    params_.AddBuffer(prefix + ".bn.running_mean", Tensor({cout}, 0.0));
    params_.AddBuffer(prefix + ".bn.running_var", Tensor({cout}, 1.0));
  };
  auto lstm = [&](const std::string& prefix, int in, int h) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    params_.AddParameter(prefix + ".weight_ih", nn::UniformInit({4 * h, in}, bound, init));
    params_.AddParameter(prefix + ".weight_hh", nn::UniformInit({4 * h, h}, bound, init));
    params_.AddParameter(prefix + ".bias", nn::UniformInit({4 * h}, bound, init));
  };
  auto linear = [&](const std::string& prefix, int in, int out, bool bias) {
    params_.AddParameter(prefix + ".weight", nn::XavierUniform({out, in}, in, out, init));
    if (bias) params_.AddParameter(prefix + ".bias", Tensor({out}, 0.0));
  };

  const double emb_bound = std::sqrt(3.0) * std::sqrt(2.0 / (vocab_.size() + e.embed_dim));
  params_.AddParameter("encoder.embedding.weight", nn::UniformInit({vocab_.size(), e.embed_dim}, emb_bound, init));
  int cin = e.embed_dim;
  for (int i = 0; i < e.n_conv; ++i) {
    conv("encoder.conv" + std::to_string(i), cin, e.conv_filters, e.conv_kernel);
    cin = e.conv_filters;
  }
  lstm("encoder.bilstm.fwd", cin, H);
  lstm("encoder.bilstm.bwd", cin, H);

  if (config_.multi_speaker) {
    const int S = config_.speaker_dim;
    params_.AddParameter("speaker.norm1.gamma", Tensor({S}, 1.0));
    params_.AddParameter("speaker.norm1.beta", Tensor({S}, 0.0));
    linear("speaker.dense", S, enc_dim_, true);
    params_.AddParameter("speaker.norm2.gamma", Tensor({enc_dim_}, 1.0));
    params_.AddParameter("speaker.norm2.beta", Tensor({enc_dim_}, 0.0));
  }

  int pin = M;
  for (size_t i = 0; i < d.prenet.size(); ++i) {
    linear("decoder.prenet.layer" + std::to_string(i), pin, d.prenet[i], false);
    pin = d.prenet[i];
  }
  lstm("decoder.lstm0", pin + enc_dim_, d.lstm_units);
  linear("decoder.attn.query", d.lstm_units, d.attn_dim, false);
  linear("decoder.attn.memory", enc_dim_, d.attn_dim, false);
  params_.AddParameter("decoder.attn.location_conv.weight",
                       nn::XavierUniform({d.location_filters, 2, d.location_kernel}, 2 * d.location_kernel,
                                         d.location_filters * d.location_kernel, init));
  linear("decoder.attn.location_dense", d.location_filters, d.attn_dim, false);
  linear("decoder.attn.v", d.attn_dim, 1, false);
  lstm("decoder.lstm1", d.lstm_units + enc_dim_, d.lstm_units);
  linear("decoder.mel_proj", d.lstm_units + enc_dim_, M, true);
  linear("decoder.gate_proj", d.lstm_units + enc_dim_, 1, true);

  int pc = M;
  for (int i = 0; i < d.postnet_layers; ++i) {
    const int out = i + 1 == d.postnet_layers ? M : d.postnet_filters;
    conv("postnet.conv" + std::to_string(i), pc, out, d.postnet_kernel);
    pc = out;
  }
}

bool Tacotron2::BnTraining(const std::string& prefix) const {
  return training_ && !nn::HasAnyPrefix(prefix, frozen_);
}

Var Tacotron2::ConvBlock(const std::string& prefix, const Var& x, const std::vector<double>& mask,
                         bool tanh_act, bool relu_act, double dropout) {
  Var w = P(prefix + ".weight");
  Var b = P(prefix + ".bias");
  Var y = ag::Conv1d(ag::MaskTime(x, mask), w, &b, 1);
  nn::BatchNormState st;
  st.running_mean = &params_.Get(prefix + ".bn.running_mean").mutable_value();
  st.running_var = &params_.Get(prefix + ".bn.running_var").mutable_value();
  y = ag::BatchNorm(y, P(prefix + ".bn.gamma"), P(prefix + ".bn.beta"), mask, BnTraining(prefix), st);
  if (tanh_act) y = ag::Tanh(y);
  if (relu_act) y = ag::Relu(y);
  if (training_) y = ag::Dropout(y, dropout, rng_);
  return ag::MaskTime(y, mask);
}

Var Tacotron2::Encode(const TextBatch& text) {
  if (text.batch < 1 || text.max_length < 1) throw Error("encode: empty input");
  const int B = text.batch, L = text.max_length;
  const auto mask = LengthMask(text.lengths, L);
  Var x = ag::Embedding(text.ids, B, L, P("encoder.embedding.weight"));
  for (int i = 0; i < config_.encoder.n_conv; ++i) {
    x = ConvBlock("encoder.conv" + std::to_string(i), x, mask, false, true, config_.encoder.dropout);
  }
  const int H = config_.encoder.bilstm_units / 2;
  std::vector<Var> fwd(L), bwd(L);
  for (int dir = 0; dir < 2; ++dir) {
    const std::string p = dir == 0 ? "encoder.bilstm.fwd" : "encoder.bilstm.bwd";
    Var wih = P(p + ".weight_ih"), whh = P(p + ".weight_hh"), bias = P(p + ".bias");
    Var h = ag::Constant(Tensor({B, H}, 0.0));
    Var c = h;
    for (int k = 0; k < L; ++k) {
      const int t = dir == 0 ? k : L - 1 - k;
      std::vector<double> step(B);
      for (int b = 0; b < B; ++b) step[b] = t < text.lengths[b] ? 1.0 : 0.0;
      Var hc = ag::LstmCell(ag::SelectTime(x, t), h, c, wih, whh, bias, &step);
      h = ag::SliceLast(hc, 0, H);
      c = ag::SliceLast(hc, H, H);
      (dir == 0 ? fwd : bwd)[t] = h;
    }
  }
  Var out = ag::Concat({ag::StackTime(fwd), ag::StackTime(bwd)});
  return ag::MaskTime(out, mask);
}

Var Tacotron2::FuseSpeaker(const Var& encoder_states, const Tensor& embeddings, const std::vector<int>& lengths) {
  if (!config_.multi_speaker) throw Error("model is single-speaker");
  const int B = encoder_states.dim(0);
  if (embeddings.rank() != 2 || embeddings.dim(0) != B || embeddings.dim(1) != config_.speaker_dim) {
    throw Error("speaker embedding must be [" + std::to_string(B) + ", " + std::to_string(config_.speaker_dim) +
                "], got " + nn::ShapeString(embeddings.shape()));
  }
  Var e = ag::LayerNorm(ag::Constant(embeddings), P("speaker.norm1.gamma"), P("speaker.norm1.beta"));
  Var db = P("speaker.dense.bias");
  e = ag::Linear(e, P("speaker.dense.weight"), &db);
  e = ag::LayerNorm(e, P("speaker.norm2.gamma"), P("speaker.norm2.beta"));
  return ag::MaskTime(ag::AddRows(encoder_states, e), LengthMask(lengths, encoder_states.dim(1)));
}

Tacotron2::DecoderState Tacotron2::InitialState(int batch, int length) {
  const int H = config_.decoder.lstm_units;
  DecoderState s;
  s.h0 = ag::Constant(Tensor({batch, H}, 0.0));
  s.c0 = s.h0;
  s.h1 = s.h0;
  s.c1 = s.h0;
  s.context = ag::Constant(Tensor({batch, enc_dim_}, 0.0));
  s.attn = ag::Constant(Tensor({batch, length}, 0.0));
  s.attn_cum = s.attn;
  return s;
}

std::pair<Var, Var> Tacotron2::Step(const Var& prev_frame, const Var& memory, const Var& processed_memory,
                                    const std::vector<int>& lengths, DecoderState* s) {
  const auto& d = config_.decoder;
  const int B = memory.dim(0), L = memory.dim(1);
  const int H = d.lstm_units;
  Var x = prev_frame;
  for (size_t i = 0; i < d.prenet.size(); ++i) {
    x = ag::Relu(ag::Linear(x, P("decoder.prenet.layer" + std::to_string(i) + ".weight"), nullptr));
    x = ag::Dropout(x, d.prenet_dropout, rng_);
  }
  Var hc0 = ag::LstmCell(ag::Concat({x, s->context}), s->h0, s->c0, P("decoder.lstm0.weight_ih"),
                         P("decoder.lstm0.weight_hh"), P("decoder.lstm0.bias"));
  s->h0 = ag::SliceLast(hc0, 0, H);
  s->c0 = ag::SliceLast(hc0, H, H);

  Var q = ag::Linear(s->h0, P("decoder.attn.query.weight"), nullptr);
  Var loc_in = ag::Concat({ag::Reshape(s->attn, {B, L, 1}), ag::Reshape(s->attn_cum, {B, L, 1})});
  Var loc = ag::Conv1d(loc_in, P("decoder.attn.location_conv.weight"), nullptr, 1);
  loc = ag::Linear(loc, P("decoder.attn.location_dense.weight"), nullptr);
  Var energy = ag::Tanh(ag::AddRows(ag::Add(processed_memory, loc), q));
  energy = ag::Reshape(ag::Linear(energy, P("decoder.attn.v.weight"), nullptr), {B, L});
  s->attn = ag::MaskedSoftmax(energy, lengths);
  s->attn_cum = ag::Add(s->attn_cum, s->attn);
  s->context = ag::WeightedSum(s->attn, memory);

  Var hc1 = ag::LstmCell(ag::Concat({s->h0, s->context}), s->h1, s->c1, P("decoder.lstm1.weight_ih"),
                         P("decoder.lstm1.weight_hh"), P("decoder.lstm1.bias"));
  s->h1 = ag::SliceLast(hc1, 0, H);
  s->c1 = ag::SliceLast(hc1, H, H);

  Var proj_in = ag::Concat({s->h1, s->context});
  Var mb = P("decoder.mel_proj.bias");
  Var gb = P("decoder.gate_proj.bias");
  Var mel = ag::Linear(proj_in, P("decoder.mel_proj.weight"), &mb);
  Var gate = ag::Linear(proj_in, P("decoder.gate_proj.weight"), &gb);
  return {mel, gate};
}

Var Tacotron2::Postnet(const Var& mel, const std::vector<double>& mask) {
  const auto& d = config_.decoder;
  Var x = mel;
  for (int i = 0; i < d.postnet_layers; ++i) {
    const bool last = i + 1 == d.postnet_layers;
    x = ConvBlock("postnet.conv" + std::to_string(i), x, mask, !last, false, d.postnet_dropout);
  }
  return ag::Add(mel, x);
}

SpectrogenOutput Tacotron2::DecodeTeacherForced(const Var& memory, const std::vector<int>& lengths,
                                                const MelBatch& targets) {
  const int B = memory.dim(0), L = memory.dim(1);
  if (L < 1) throw Error("decode: zero-length encoder input");
  if (targets.batch != B) throw Error("decode: batch size mismatch");
  const int T = targets.max_frames;
  const int M = config_.n_mels;
  if (targets.mels.dim(2) != M) throw Error("decode: target has " + std::to_string(targets.mels.dim(2)) + " mel bins");
  Var processed = ag::Linear(memory, P("decoder.attn.memory.weight"), nullptr);
  DecoderState s = InitialState(B, L);
  std::vector<Var> mels, gates, attns;
  SpectrogenOutput out;
  out.attention = Tensor({B, T, L}, 0.0);
  Tensor prev({B, M}, 0.0);
  for (int t = 0; t < T; ++t) {
    auto [mel, gate] = Step(ag::Constant(prev), memory, processed, lengths, &s);
    mels.push_back(mel);
    gates.push_back(gate);
    attns.push_back(s.attn);
    for (int b = 0; b < B; ++b) {
      std::copy(s.attn.value().data() + static_cast<size_t>(b) * L, s.attn.value().data() + static_cast<size_t>(b + 1) * L,
                out.attention.data() + (static_cast<size_t>(b) * T + t) * L);
      const double* src = targets.mels.data() + (static_cast<size_t>(b) * T + t) * M;
      std::copy(src, src + M, prev.data() + static_cast<size_t>(b) * M);
    }
  }
  out.mel_pre = ag::StackTime(mels);
  out.gate_logits = ag::Reshape(ag::StackTime(gates), {B, T});
  out.mel_post = Postnet(out.mel_pre, targets.mask);
  out.frames = targets.lengths;
  if (config_.decoder.guided_attention_weight > 0) {
    // W[b,t,l] = 1 - exp(-(l/L_b - t/T_b)^2 / 2 sigma^2), zero outside the valid region.
    const double two_s2 = 2.0 * config_.decoder.guided_attention_sigma * config_.decoder.guided_attention_sigma;
    Tensor w({B, T, L}, 0.0);
    double valid = 0.0;
    for (int b = 0; b < B; ++b) {
      const int Tb = targets.lengths[b], Lb = lengths[b];
      valid += Tb;
      for (int t = 0; t < Tb; ++t) {
        for (int l = 0; l < Lb; ++l) {
          const double d = static_cast<double>(l) / Lb - static_cast<double>(t) / Tb;
          w[(static_cast<size_t>(b) * T + t) * L + l] = 1.0 - std::exp(-d * d / two_s2);
        }
      }
    }
    out.attention_guide = ag::Scale(ag::Sum(ag::Mul(ag::StackTime(attns), ag::Constant(std::move(w)))), 1.0 / valid);
  }
  return out;
}

SpectrogenOutput Tacotron2::DecodeInference(const Var& memory, int length, int max_steps, double gate_threshold) {
  if (max_steps < 1) throw Error("decode: max_steps must be >= 1");
  if (memory.dim(0) != 1) throw Error("decode: inference takes a batch of one");
  const int L = memory.dim(1);
  if (L < 1 || length < 1) throw Error("decode: zero-length encoder input");
  const int M = config_.n_mels;
  const std::vector<int> lengths = {length};
  Var processed = ag::Linear(memory, P("decoder.attn.memory.weight"), nullptr);
  DecoderState s = InitialState(1, L);
  std::vector<Var> mels, gates;
  std::vector<double> attn;
  Tensor prev({1, M}, 0.0);
  SpectrogenOutput out;
  out.truncated = true;
  for (int t = 0; t < max_steps; ++t) {
    auto [mel, gate] = Step(ag::Constant(prev), memory, processed, lengths, &s);
    mels.push_back(mel);
    gates.push_back(gate);
    attn.insert(attn.end(), s.attn.value().vec().begin(), s.attn.value().vec().end());
    prev = mel.value();
    const double p = 1.0 / (1.0 + std::exp(-gate.value()[0]));
    if (p > gate_threshold) {
      out.truncated = false;
      break;
    }
  }
  const int T = static_cast<int>(mels.size());
  out.mel_pre = ag::StackTime(mels);
  out.gate_logits = ag::Reshape(ag::StackTime(gates), {1, T});
  out.mel_post = Postnet(out.mel_pre, std::vector<double>(T, 1.0));
  out.attention = Tensor({1, T, L}, std::move(attn));
  out.frames = {T};
  return out;
}

LossTerms Tacotron2::Loss(const SpectrogenOutput& out, const MelBatch& targets) const {
  if (out.mel_pre.shape() != targets.mels.shape() || out.mel_post.shape() != targets.mels.shape()) {
    throw Error("loss: shape mismatch " + nn::ShapeString(out.mel_post.shape()) + " vs " +
                nn::ShapeString(targets.mels.shape()));
  }
  if (out.gate_logits.value().numel() != targets.stops.numel()) throw Error("loss: stop target shape mismatch");
  LossTerms l;
  l.mel_pre_mse = ag::MaskedMse(out.mel_pre, targets.mels, targets.mask);
  l.mel_post_mse = ag::MaskedMse(out.mel_post, targets.mels, targets.mask);
  l.stop_bce = ag::MaskedBceWithLogits(out.gate_logits, targets.stops, targets.mask,
                                        config_.decoder.stop_pos_weight);
  l.total = ag::Add(ag::Add(l.mel_pre_mse, l.mel_post_mse), l.stop_bce);
  if (config_.decoder.guided_attention_weight > 0 && out.attention_guide.defined()) {
    l.guided_attention = out.attention_guide;
    l.total = ag::Add(l.total, ag::Scale(l.guided_attention, config_.decoder.guided_attention_weight));
  }
  return l;
}

SpectrogenOutput Tacotron2::Forward(const TextBatch& text, const MelBatch& targets, const Tensor* speaker) {
  Var memory = Encode(text);
  if (speaker) {
    memory = FuseSpeaker(memory, *speaker, text.lengths);
  } else if (config_.multi_speaker) {
    throw Error("multi-speaker model needs speaker embeddings");
  }
  return DecodeTeacherForced(memory, text.lengths, targets);
}

SpectrogenOutput Tacotron2::Infer(const std::vector<int>& ids, const Tensor* speaker, int max_steps,
                                  double gate_threshold) {
  nn::NoGradGuard no_grad;
  const bool was_training = training_;
  training_ = false;
  TextBatch tb = TextBatch::FromSequences({ids});
  Var memory = Encode(tb);
  if (speaker) {
    Tensor emb = speaker->rank() == 1 ? speaker->Reshaped({1, speaker->dim(0)}) : *speaker;
    memory = FuseSpeaker(memory, emb, tb.lengths);
  } else if (config_.multi_speaker) {
    training_ = was_training;
    throw Error("multi-speaker model needs a speaker embedding");
  }
  SpectrogenOutput out = DecodeInference(memory, tb.lengths[0], max_steps, gate_threshold);
  training_ = was_training;
  return out;
}

json Tacotron2::Metadata() const {
  return {{"model", "tacotron2"}, {"vocab", vocab_.ToJson()}, {"tacotron", TacotronConfigToJson(config_)}};
}

void SaveTacotron(const std::string& path, const Tacotron2& model, const json& extra) {
  json meta = extra.is_object() ? extra : json::object();
  const json model_meta = model.Metadata();
  for (auto& [k, v] : model_meta.items()) meta[k] = v;
  nn::SaveCheckpoint(path, model.params(), meta);
}

LoadedTacotron LoadTacotron(const std::string& path) {
  nn::Checkpoint ck = nn::LoadCheckpoint(path);
  if (ck.metadata.value("model", "") != "tacotron2") throw Error(path + " is not a tacotron2 checkpoint");
  LoadedTacotron out;
  out.model = std::make_unique<Tacotron2>(TacotronConfigFromJson(ck.metadata.at("tacotron")),
                                          CharVocabulary::FromJson(ck.metadata.at("vocab")), 0);
  nn::LoadStrict(ck, &out.model->params());
  out.metadata = std::move(ck.metadata);
  return out;
}

}  // namespace comix::spectrogen
