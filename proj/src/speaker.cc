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

#include "comix/speaker.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "comix/error.h"
#include "comix/util/rng.h"
#include "comix/util/subprocess.h"

namespace comix::speaker {

using nlohmann::json;

const char* SourceName(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::kAudio:
      return "audio";
    case EmbeddingSource::kAverage:
      return "average";
    case EmbeddingSource::kStub:
      return "stub";
  }
  return "?";
}

const char* PolicyName(Policy p) {
  switch (p) {
    case Policy::kNone:
      return "none";
    case Policy::kAudioEmbed:
      return "audio_embed";
    case Policy::kAvgEmbed:
      return "avg_embed";
  }
  return "?";
}

Policy ParsePolicy(const std::string& s) {
  if (s == "none" || s.empty()) return Policy::kNone;
  if (s == "audio_embed" || s == "audio-embed") return Policy::kAudioEmbed;
  if (s == "avg_embed" || s == "avg-embed") return Policy::kAvgEmbed;
  throw Error("unknown speaker policy '" + s + "'");
}

void Extractor::CheckClip(const audio::AudioClip& clip) {
  if (clip.Duration() < 1.0) throw Error("speaker extraction needs at least 1 s of audio");
}

SpeakerEmbedding StubExtractor::Extract(const audio::AudioClip& clip, const std::string& utterance_id,
                                        const std::string&) const {
  CheckClip(clip);
  Rng rng(SeedFromKey(utterance_id, seed_));
  SpeakerEmbedding e;
  e.source = EmbeddingSource::kStub;
  e.vector.resize(dim());
  double norm = 0.0;
  for (double& v : e.vector) {
    v = rng.Normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : e.vector) v /= norm;
  return e;
}

std::string StubExtractor::Version() const { return "stub:" + std::to_string(seed_); }

SpeakerEmbedding ExternalExtractor::Extract(const audio::AudioClip& clip, const std::string&,
                                            const std::string& audio_path) const {
  CheckClip(clip);
  if (audio_path.empty()) throw Error("external speaker extractor needs an audio path");
  auto lines = RunLineProtocol(command_, {audio_path}, std::chrono::seconds(30));
  if (!lines || lines->empty()) throw Error("speaker extractor unavailable: " + command_);
  std::istringstream in((*lines)[0]);
  SpeakerEmbedding e;
  e.source = EmbeddingSource::kAudio;
  double v;
  while (in >> v) {
    if (!std::isfinite(v)) throw Error("speaker extractor returned a non-finite value");
    e.vector.push_back(v);
  }
  if (static_cast<int>(e.vector.size()) != dim()) {
    throw Error("speaker extractor returned " + std::to_string(e.vector.size()) + " values, expected " +
                std::to_string(dim()));
  }
  return e;
}

std::unique_ptr<Extractor> MakeExtractor(const std::string& kind, const std::string& command, uint64_t seed,
                                         int dim) {
  if (kind == "stub") return std::make_unique<StubExtractor>(seed, dim);
  if (kind == "external") {
    if (command.empty()) throw Error("speaker extractor unavailable: no command configured");
    return std::make_unique<ExternalExtractor>(command, dim);
  }
  throw Error("unknown speaker extractor '" + kind + "'");
}

json EmbeddingTable::ToJson() const {
  json speakers = json::object();
  for (const auto& [id, e] : entries) speakers[id] = {{"vector", e.vector}, {"count", counts.at(id)}};
  return {{"extractor", extractor_version}, {"speakers", speakers}};
}

EmbeddingTable EmbeddingTable::FromJson(const json& j) {
  EmbeddingTable t;
  t.extractor_version = j.value("extractor", "");
  for (const auto& [id, v] : j.at("speakers").items()) {
    SpeakerEmbedding e;
    e.source = EmbeddingSource::kAverage;
    e.speaker_id = id;
    e.vector = v.at("vector").get<std::vector<double>>();
    t.entries[id] = std::move(e);
    t.counts[id] = v.at("count").get<int>();
  }
  return t;
}

void EmbeddingTable::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << ToJson().dump(1) << "\n";
}

EmbeddingTable EmbeddingTable::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return FromJson(json::parse(in));
}

SpeakerEmbedding ExtractFile(const std::string& wav_path, const Extractor& extractor, int sample_rate,
                             const std::string& utterance_id) {
  audio::AudioClip clip = audio::LoadWav(wav_path, sample_rate);
  SpeakerEmbedding e = extractor.Extract(clip, utterance_id.empty() ? wav_path : utterance_id, wav_path);
  return e;
}

EmbeddingTable BuildTable(const corpus::CorpusManifest& manifest, const Extractor& extractor) {
  EmbeddingTable table;
  table.extractor_version = extractor.Version();
  std::map<std::string, std::vector<double>> sums;
  for (const auto& id : manifest.Speakers()) table.counts[id] = 0;
  for (const auto& r : manifest.records) {
    SpeakerEmbedding e;
    try {
      e = ExtractFile(r.audio_path, extractor, manifest.sample_rate_hz, r.id);
    } catch (const Error&) {
      continue;
    }
    auto& s = sums[r.speaker_id];
    if (s.empty()) s.assign(e.vector.size(), 0.0);
    for (size_t i = 0; i < s.size(); ++i) s[i] += e.vector[i];
    ++table.counts[r.speaker_id];
  }
  for (const auto& [id, n] : table.counts) {
    if (n == 0) throw Error("speaker " + id + " has no readable audio");
    SpeakerEmbedding avg;
    avg.source = EmbeddingSource::kAverage;
    avg.speaker_id = id;
    avg.vector = sums[id];
    for (double& v : avg.vector) v /= n;
    table.entries[id] = std::move(avg);
  }
  return table;
}

SpeakerEmbedding LookupSpeaker(const std::string& speaker_id, const EmbeddingTable& table) {
  auto it = table.entries.find(speaker_id);
  if (it == table.entries.end()) throw Error("unseen speaker not supported in avg-embed: " + speaker_id);
  return it->second;
}

SpeakerEmbedding Lookup(Policy policy, const corpus::UtteranceRecord& record, const EmbeddingTable& table,
                        const Extractor* extractor, int sample_rate) {
  switch (policy) {
    case Policy::kAvgEmbed:
      return LookupSpeaker(record.speaker_id, table);
    case Policy::kAudioEmbed: {
      if (!extractor) throw Error("speaker extractor unavailable");
      SpeakerEmbedding e = ExtractFile(record.audio_path, *extractor, sample_rate, record.id);
      e.speaker_id = record.speaker_id;
      return e;
    }
    case Policy::kNone:
      break;
  }
  throw Error("speaker lookup with policy none");
}

}  // namespace comix::speaker
