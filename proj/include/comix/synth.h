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

#ifndef COMIX_SYNTH_H_
#define COMIX_SYNTH_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "comix/audio.h"
#include "comix/nn/tensor.h"
#include "comix/spectrogen.h"
#include "comix/speaker.h"
#include "comix/textnorm.h"
#include "comix/vocoder.h"
#include "json.hpp"

namespace comix::synth {

struct SpeakerArg {
  std::string speaker_id;
  std::string reference_audio;

  bool empty() const { return speaker_id.empty() && reference_audio.empty(); }
};

struct SynthOptions {
  // Negative selects the vocoder's sigma_infer.
  double sigma = -1.0;
  // 0 selects decoder.max_steps of the checkpoint.
  int max_steps = 0;
  uint64_t seed = 0;
  // Command for the external speaker extractor, if the checkpoint used one.
  std::string extractor_command;
};

struct SynthResult {
  audio::AudioClip clip;
  // Text as fed to the encoder.
  std::string encoder_text;
  nn::Tensor mel;        // [frames, n_mels]
  nn::Tensor attention;  // [frames, input length]
  int frames = 0;
  bool truncated = false;
};

// Loaded checkpoint pair. Synthesize reseeds the decoder dropout stream, so
// calls on one instance must not overlap.
class Synthesizer {
 public:
  Synthesizer(const std::string& taco_ckpt, const std::string& vocoder_ckpt);

  // utt_key seeds the prenet dropout and the vocoder noise.
  SynthResult Synthesize(const std::string& text, const SpeakerArg& speaker, const SynthOptions& opts,
                         const std::string& utt_key = "");

  const AudioConfig& audio() const { return vocoder_->audio(); }
  speaker::Policy policy() const { return policy_; }
  textnorm::TransliterationProvider& provider() { return provider_; }
  spectrogen::Tacotron2& tacotron() { return *taco_; }
  vocoder::Waveglow& waveglow() { return *vocoder_; }

 private:
  nn::Tensor SpeakerEmbedding(const SpeakerArg& speaker, const SynthOptions& opts) const;

  std::unique_ptr<spectrogen::Tacotron2> taco_;
  std::unique_ptr<vocoder::Waveglow> vocoder_;
  nlohmann::json taco_meta_;
  speaker::Policy policy_ = speaker::Policy::kNone;
  speaker::EmbeddingTable table_;
  std::string extractor_version_;
  textnorm::TransliterationProvider provider_;
};

// Writes out_dir/<id>.wav, <id>.mel.png, <id>.attn.png, <id>.mel.feat and
// <id>.attn.feat.
void WriteOutputs(const SynthResult& r, const std::string& out_dir, const std::string& id);

// Grey-scale PNG of a [rows, cols] matrix, min-max scaled. Rows run along the
// x axis and column 0 sits at the bottom.
void WriteMatrixPng(const std::string& path, const nn::Tensor& m);

struct BatchItem {
  std::string id;
  std::string text;
  SpeakerArg speaker;
};

// TSV `id<TAB>text[<TAB>speaker_id]`; '#' lines and blanks are skipped.
std::vector<BatchItem> ReadTextManifest(const std::string& path);

struct BatchReport {
  struct Entry {
    std::string id;
    bool ok = false;
    bool truncated = false;
    double duration_s = 0.0;
    int frames = 0;
    std::string error;
  };
  std::vector<Entry> entries;

  int failures() const;
  int truncations() const;
  nlohmann::json ToJson() const;
};

// Per-item errors are recorded and the batch continues. Writes report.json.
BatchReport BatchSynthesize(Synthesizer& synth, const std::vector<BatchItem>& items, const SynthOptions& opts,
                            const std::string& out_dir);

}  // namespace comix::synth

#endif  // COMIX_SYNTH_H_
