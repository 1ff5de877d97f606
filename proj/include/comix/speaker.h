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

#ifndef COMIX_SPEAKER_H_
#define COMIX_SPEAKER_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "comix/audio.h"
#include "comix/corpus.h"
#include "json.hpp"

namespace comix::speaker {

enum class EmbeddingSource { kAudio, kAverage, kStub };
enum class Policy { kNone, kAudioEmbed, kAvgEmbed };

const char* SourceName(EmbeddingSource s);
const char* PolicyName(Policy p);
// Accepts "none", "audio_embed" / "audio-embed", "avg_embed" / "avg-embed".
Policy ParsePolicy(const std::string& s);

struct SpeakerEmbedding {
  std::vector<double> vector;
  EmbeddingSource source = EmbeddingSource::kAudio;
  std::string speaker_id;
};

// Adapter over a pre-trained speaker-verification model.
class Extractor {
 public:
  virtual ~Extractor() = default;
  // `utterance_id` and `audio_path` identify the clip for extractors that
  // work on files or keys rather than samples.
  virtual SpeakerEmbedding Extract(const audio::AudioClip& clip, const std::string& utterance_id,
                                   const std::string& audio_path) const = 0;
  // Identity recorded in tables and checkpoints; also the cache key.
  virtual std::string Version() const = 0;
  int dim() const { return dim_; }

 protected:
  explicit Extractor(int dim) : dim_(dim) {}
  // Rejects clips shorter than one second.
  static void CheckClip(const audio::AudioClip& clip);

 private:
  int dim_;
};

// Deterministic stand-in: a seeded hash of the utterance id drives a normal
// draw that is scaled to unit length.
class StubExtractor : public Extractor {
 public:
  explicit StubExtractor(uint64_t seed = 0, int dim = 512) : Extractor(dim), seed_(seed) {}
  SpeakerEmbedding Extract(const audio::AudioClip& clip, const std::string& utterance_id,
                           const std::string& audio_path) const override;
  std::string Version() const override;

 private:
  uint64_t seed_;
};

// Line protocol: the command reads one WAV path per line and answers with
// `dim` whitespace-separated reals per line.
class ExternalExtractor : public Extractor {
 public:
  explicit ExternalExtractor(std::string command, int dim = 512) : Extractor(dim), command_(std::move(command)) {}
  SpeakerEmbedding Extract(const audio::AudioClip& clip, const std::string& utterance_id,
                           const std::string& audio_path) const override;
  std::string Version() const override { return "external:" + command_; }

 private:
  std::string command_;
};

// kind "stub" or "external".
std::unique_ptr<Extractor> MakeExtractor(const std::string& kind, const std::string& command, uint64_t seed,
                                         int dim = 512);

struct EmbeddingTable {
  std::map<std::string, SpeakerEmbedding> entries;
  std::map<std::string, int> counts;
  std::string extractor_version;

  nlohmann::json ToJson() const;
  static EmbeddingTable FromJson(const nlohmann::json& j);
  void Save(const std::string& path) const;
  static EmbeddingTable Load(const std::string& path);
};

// Per-speaker arithmetic mean of the utterance embeddings. Unreadable audio is
// skipped; a speaker left with no readable audio is an error.
EmbeddingTable BuildTable(const corpus::CorpusManifest& manifest, const Extractor& extractor);

// AUDIO_EMBED extracts from the record's audio; AVG_EMBED returns the table
// entry for the record's speaker.
SpeakerEmbedding Lookup(Policy policy, const corpus::UtteranceRecord& record, const EmbeddingTable& table,
                        const Extractor* extractor, int sample_rate);
SpeakerEmbedding LookupSpeaker(const std::string& speaker_id, const EmbeddingTable& table);
SpeakerEmbedding ExtractFile(const std::string& wav_path, const Extractor& extractor, int sample_rate,
                             const std::string& utterance_id = "");

}  // namespace comix::speaker

#endif  // COMIX_SPEAKER_H_
