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

#ifndef COMIX_SPECTROGEN_H_
#define COMIX_SPECTROGEN_H_

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "comix/config.h"
#include "comix/nn/autograd.h"
#include "comix/nn/params.h"
#include "comix/util/rng.h"
#include "json.hpp"

namespace comix::spectrogen {

using nn::Tensor;
using nn::Var;

// Character inventory of the encoder. Index 0 is PAD and index 1 is EOS.
class CharVocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;

  // Devanagari block U+0900..U+097F, space and ". , ? !".
  static CharVocabulary Devanagari();
  // ASCII letters, digits, space and ". , ? !"; used for English pre-training.
  static CharVocabulary Roman();

  CharVocabulary(std::string name, std::vector<std::string> symbols);

  // Throws naming the first character outside the inventory.
  std::vector<int> Encode(std::string_view text, bool append_eos = true) const;
  std::string Decode(const std::vector<int>& ids) const;

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string& name() const { return name_; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  bool Contains(std::string_view symbol) const { return index_.count(std::string(symbol)) > 0; }

  nlohmann::json ToJson() const;
  static CharVocabulary FromJson(const nlohmann::json& j);

  bool operator==(const CharVocabulary& o) const { return symbols_ == o.symbols_; }

 private:
  std::string name_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

struct TacotronConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  int n_mels = 80;
  bool multi_speaker = false;
  int speaker_dim = 512;
  // Log-mel value used to pad targets (ln eps).
  double pad_value = -11.512925464970229;

  bool operator==(const TacotronConfig&) const = default;
};

nlohmann::json TacotronConfigToJson(const TacotronConfig& c);
TacotronConfig TacotronConfigFromJson(const nlohmann::json& j);
TacotronConfig TacotronConfigFrom(const ToolkitConfig& cfg, bool multi_speaker);

// Decoder outputs for a padded batch. Per-item slices are exposed by the
// helpers below.
struct SpectrogenOutput {
  Var mel_pre;      // [B, T, n_mels]
  Var mel_post;     // [B, T, n_mels]
  Var gate_logits;  // [B, T]
  Tensor attention;  // [B, T, L]
  Var attention_guide;  // teacher forcing only: mean off-diagonal attention mass
  std::vector<int> frames;
  bool truncated = false;

  // Item b as [frames[b], n_mels] / [frames[b]] / [frames[b], L].
  Tensor MelPost(int b) const;
  Tensor MelPre(int b) const;
  std::vector<double> StopProbs(int b) const;
  Tensor Attention(int b, int input_length) const;
};

struct LossTerms {
  Var mel_pre_mse;
  Var mel_post_mse;
  Var stop_bce;
  Var guided_attention;  // set when decoder.guided_attention_weight > 0
  Var total;
};

// Padded text batch.
struct TextBatch {
  std::vector<int> ids;  // [B, L] row-major, PAD-filled
  std::vector<int> lengths;
  int batch = 0;
  int max_length = 0;

  static TextBatch FromSequences(const std::vector<std::vector<int>>& seqs);
};

// Padded mel targets with frame masks and stop targets.
struct MelBatch {
  Tensor mels;                // [B, T, n_mels]
  std::vector<double> mask;   // [B, T]
  Tensor stops;               // [B, T]; 1 on the last real frame
  std::vector<int> lengths;
  int batch = 0;
  int max_frames = 0;

  static MelBatch FromMels(const std::vector<Tensor>& mels, double pad_value);
};

class Tacotron2 {
 public:
  Tacotron2(const TacotronConfig& config, CharVocabulary vocab, uint64_t seed);

  const TacotronConfig& config() const { return config_; }
  const CharVocabulary& vocab() const { return vocab_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  // Training mode enables encoder/postnet dropout and batch statistics.
  void SetTraining(bool training) { training_ = training; }
  bool training() const { return training_; }
  // Batch-norm layers under these prefixes always run on running statistics,
  // so frozen blocks stay bit-identical.
  void SetFrozenPrefixes(std::vector<std::string> prefixes) { frozen_ = std::move(prefixes); }
  // Dropout stream (prenet dropout stays active at inference).
  void Reseed(uint64_t seed) { rng_ = Rng(seed); }

  // [B, L, enc_dim]; positions past lengths[b] are zero.
  Var Encode(const TextBatch& text);
  // enc + LN2(Dense(LN1(emb))) at every step. embeddings: [B, speaker_dim].
  Var FuseSpeaker(const Var& encoder_states, const Tensor& embeddings, const std::vector<int>& lengths);
  SpectrogenOutput DecodeTeacherForced(const Var& memory, const std::vector<int>& lengths,
                                       const MelBatch& targets);
  // Batch of one; stops at the first frame whose stop probability exceeds
  // gate_threshold, else flags truncation at max_steps.
  SpectrogenOutput DecodeInference(const Var& memory, int length, int max_steps, double gate_threshold);

  LossTerms Loss(const SpectrogenOutput& out, const MelBatch& targets) const;

  // Convenience: encode (+ fuse) + teacher-forced decode.
  SpectrogenOutput Forward(const TextBatch& text, const MelBatch& targets, const Tensor* speaker = nullptr);
  // Convenience: single utterance inference under no-grad.
  SpectrogenOutput Infer(const std::vector<int>& ids, const Tensor* speaker, int max_steps,
                         double gate_threshold);

  nlohmann::json Metadata() const;

 private:
  Var P(const std::string& name) { return params_.Get(name); }
  Var ConvBlock(const std::string& prefix, const Var& x, const std::vector<double>& mask, bool tanh_act,
                bool relu_act, double dropout);
  Var Postnet(const Var& mel, const std::vector<double>& mask);
  bool BnTraining(const std::string& prefix) const;

  struct DecoderState {
    Var h0, c0, h1, c1, context, attn, attn_cum;
  };
  DecoderState InitialState(int batch, int length);
  // One decoder step; returns (mel frame [B, M], gate logit [B, 1]).
  std::pair<Var, Var> Step(const Var& prev_frame, const Var& memory, const Var& processed_memory,
                           const std::vector<int>& lengths, DecoderState* s);

  TacotronConfig config_;
  CharVocabulary vocab_;
  nn::ParameterStore params_;
  Rng rng_;
  bool training_ = false;
  std::vector<std::string> frozen_;
  int enc_dim_ = 0;
};

// Checkpoint = parameters + {model, vocab, tacotron config, extra}.
void SaveTacotron(const std::string& path, const Tacotron2& model, const nlohmann::json& extra);
struct LoadedTacotron {
  std::unique_ptr<Tacotron2> model;
  nlohmann::json metadata;
};
LoadedTacotron LoadTacotron(const std::string& path);

}  // namespace comix::spectrogen

#endif  // COMIX_SPECTROGEN_H_
