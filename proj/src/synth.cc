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

#include "comix/synth.h"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "comix/error.h"
#include "comix/util/rng.h"

namespace comix::synth {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr uint64_t kDropoutStream = 0x5eedd00dULL;
constexpr uint64_t kNoiseStream = 0x0a0d10ULL;

}  // namespace

Synthesizer::Synthesizer(const std::string& taco_ckpt, const std::string& vocoder_ckpt) {
  spectrogen::LoadedTacotron taco = spectrogen::LoadTacotron(taco_ckpt);
  vocoder::LoadedWaveglow voc = vocoder::LoadWaveglow(vocoder_ckpt);
  if (!taco.metadata.contains("audio")) throw Error(taco_ckpt + " carries no audio config");
  const AudioConfig taco_audio = AudioFromJson(taco.metadata.at("audio"));
  if (!(taco_audio == voc.model->audio())) {
    throw Error("audio config mismatch between " + taco_ckpt + " and " + vocoder_ckpt);
  }
  if (taco_audio.n_mels != taco.model->config().n_mels) throw Error(taco_ckpt + ": n_mels disagrees with audio config");
  taco_ = std::move(taco.model);
  vocoder_ = std::move(voc.model);
  taco_meta_ = std::move(taco.metadata);
  const json sp = taco_meta_.value("speaker", json::object());
  policy_ = speaker::ParsePolicy(sp.value("policy", "none"));
  extractor_version_ = sp.value("extractor", "");
  if (policy_ == speaker::Policy::kAvgEmbed) table_ = speaker::EmbeddingTable::FromJson(sp.at("table"));
  if ((policy_ != speaker::Policy::kNone) != taco_->config().multi_speaker) {
    throw Error(taco_ckpt + ": speaker policy disagrees with the model topology");
  }
}

nn::Tensor Synthesizer::SpeakerEmbedding(const SpeakerArg& speaker, const SynthOptions& opts) const {
  std::vector<double> v;
  switch (policy_) {
    case speaker::Policy::kNone:
      throw Error("model is single-speaker");
    case speaker::Policy::kAvgEmbed:
      if (speaker.speaker_id.empty()) throw Error("avg-embed model needs a speaker id");
      v = speaker::LookupSpeaker(speaker.speaker_id, table_).vector;
      break;
    case speaker::Policy::kAudioEmbed: {
      if (speaker.reference_audio.empty()) throw Error("audio-embed model needs reference audio");
      std::unique_ptr<speaker::Extractor> ex;
      if (extractor_version_.starts_with("stub:")) {
        ex = speaker::MakeExtractor("stub", "", std::stoull(extractor_version_.substr(5)),
                                    taco_->config().speaker_dim);
      } else {
        ex = speaker::MakeExtractor("external", opts.extractor_command, 0, taco_->config().speaker_dim);
      }
      v = speaker::ExtractFile(speaker.reference_audio, *ex, audio().sample_rate).vector;
      break;
    }
  }
  const int dim = static_cast<int>(v.size());
  if (dim != taco_->config().speaker_dim) throw Error("speaker embedding has the wrong dimension");
  return nn::Tensor({1, dim}, std::move(v));
}

SynthResult Synthesizer::Synthesize(const std::string& text, const SpeakerArg& speaker, const SynthOptions& opts,
                                    const std::string& utt_key) {
  SynthResult r;
  r.encoder_text = taco_->vocab().name() == "roman" ? textnorm::Canonicalize(text)
                                                    : textnorm::Normalize(text, provider_).devanagari;
  if (r.encoder_text.empty()) throw Error("text is empty after normalization");
  const std::vector<int> ids = taco_->vocab().Encode(r.encoder_text);

  nn::Tensor emb;
  const nn::Tensor* emb_ptr = nullptr;
  if (policy_ != speaker::Policy::kNone) {
    emb = SpeakerEmbedding(speaker, opts);
    emb_ptr = &emb;
  } else if (!speaker.empty()) {
    throw Error("model is single-speaker");
  }

  const std::string key = utt_key.empty() ? text : utt_key;
  taco_->SetTraining(false);
  taco_->Reseed(SeedFromKey(key, opts.seed ^ kDropoutStream));
  const auto& dec = taco_->config().decoder;
  const int max_steps = opts.max_steps > 0 ? opts.max_steps : dec.max_steps;
  spectrogen::SpectrogenOutput out = taco_->Infer(ids, emb_ptr, max_steps, dec.gate_threshold);
  r.frames = out.frames[0];
  r.truncated = out.truncated;
  r.mel = out.MelPost(0);
  r.attention = out.Attention(0, static_cast<int>(ids.size()));

  // The vocoder needs a sample count divisible by its group size: pad with
  // silence frames and cut the audio back to frames * hop.
  const int M = r.mel.dim(1);
  const int padded = vocoder_->PaddedFrameCount(r.frames);
  nn::Tensor mel_in({padded, M}, taco_->config().pad_value);
  std::copy(r.mel.vec().begin(), r.mel.vec().end(), mel_in.vec().begin());
  Rng noise(SeedFromKey(key, opts.seed ^ kNoiseStream));
  const double sigma = opts.sigma >= 0 ? opts.sigma : vocoder_->config().sigma_infer;
  std::vector<double> samples = vocoder_->Infer(mel_in, sigma, noise);
  samples.resize(static_cast<size_t>(r.frames) * audio().HopLength());
  r.clip.samples = std::move(samples);
  r.clip.sample_rate = audio().sample_rate;
  return r;
}

void WriteMatrixPng(const std::string& path, const nn::Tensor& m) {
  if (m.rank() != 2 || m.numel() == 0) throw Error("png: expected a non-empty matrix");
  const int W = m.dim(0), H = m.dim(1);
  const auto [lo_it, hi_it] = std::minmax_element(m.vec().begin(), m.vec().end());
  const double lo = *lo_it, span = std::max(*hi_it - lo, 1e-12);
  std::vector<png_byte> pixels(static_cast<size_t>(W) * H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = (m.data()[static_cast<size_t>(x) * H + (H - 1 - y)] - lo) / span;
      pixels[static_cast<size_t>(y) * W + x] = static_cast<png_byte>(std::lround(255.0 * v));
    }
  }
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw Error("png encoding failed for " + path);
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, W, H, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < H; ++y) png_write_row(png, pixels.data() + static_cast<size_t>(y) * W);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

void WriteOutputs(const SynthResult& r, const std::string& out_dir, const std::string& id) {
  fs::create_directories(out_dir);
  const std::string base = out_dir + "/" + id;
  audio::WriteWav(base + ".wav", r.clip);
  WriteMatrixPng(base + ".mel.png", r.mel);
  WriteMatrixPng(base + ".attn.png", r.attention);
  audio::WriteFeatureFile(base + ".mel.feat", r.mel.dim(0), r.mel.dim(1), r.mel.vec());
  audio::WriteFeatureFile(base + ".attn.feat", r.attention.dim(0), r.attention.dim(1), r.attention.vec());
}

std::vector<BatchItem> ReadTextManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<BatchItem> items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '\t');) cols.push_back(c);
    if (cols.size() < 2 || cols.size() > 3 || cols[0].empty()) {
      throw Error(path + ":" + std::to_string(lineno) + ": expected id<TAB>text[<TAB>speaker]");
    }
    BatchItem it{cols[0], cols[1], {}};
    if (cols.size() == 3) it.speaker.speaker_id = cols[2];
    items.push_back(std::move(it));
  }
  return items;
}

int BatchReport::failures() const {
  return static_cast<int>(std::count_if(entries.begin(), entries.end(), [](const Entry& e) { return !e.ok; }));
}

int BatchReport::truncations() const {
  return static_cast<int>(std::count_if(entries.begin(), entries.end(), [](const Entry& e) { return e.truncated; }));
}

json BatchReport::ToJson() const {
  json items = json::array();
  json truncated = json::array();
  for (const Entry& e : entries) {
    json j = {{"id", e.id}, {"ok", e.ok}};
    if (e.ok) {
      j["duration_s"] = e.duration_s;
      j["frames"] = e.frames;
      j["truncated"] = e.truncated;
      if (e.truncated) truncated.push_back(e.id);
    } else {
      j["error"] = e.error;
    }
    items.push_back(std::move(j));
  }
  return {{"items", items}, {"truncated", truncated}, {"failures", failures()}, {"count", entries.size()}};
}

BatchReport BatchSynthesize(Synthesizer& synth, const std::vector<BatchItem>& items, const SynthOptions& opts,
                            const std::string& out_dir) {
  fs::create_directories(out_dir);
  BatchReport report;
  for (const BatchItem& item : items) {
    BatchReport::Entry e;
    e.id = item.id;
    try {
      SynthResult r = synth.Synthesize(item.text, item.speaker, opts, item.id);
      WriteOutputs(r, out_dir, item.id);
      e.ok = true;
      e.truncated = r.truncated;
      e.frames = r.frames;
      e.duration_s = r.clip.Duration();
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    report.entries.push_back(std::move(e));
  }
  std::ofstream(out_dir + "/report.json") << report.ToJson().dump(1) << "\n";
  return report;
}

}  // namespace comix::synth
