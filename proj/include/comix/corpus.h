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

#ifndef COMIX_CORPUS_H_
#define COMIX_CORPUS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace comix::corpus {

enum class Lang { kHi, kEn };
enum class Split { kTrain, kVal };

const char* LangName(Lang l);
Lang ParseLang(const std::string& s);

struct UtteranceRecord {
  std::string id;
  std::string audio_path;
  std::string text;
  Lang lang = Lang::kHi;
  std::string speaker_id;
  double duration_s = 0.0;
  Split split = Split::kTrain;

  bool operator==(const UtteranceRecord&) const = default;
};

struct CorpusManifest {
  std::vector<UtteranceRecord> records;
  int sample_rate_hz = 22050;
  std::vector<std::string> created_from;

  double TotalSeconds() const;
  std::vector<std::string> Speakers() const;
};

struct Summary {
  size_t n_records = 0;
  double total_s = 0.0;
  std::map<std::string, double> seconds_by_lang;
  std::map<std::string, double> fraction_by_lang;
  std::map<std::string, double> seconds_by_speaker;
  std::map<std::string, size_t> val_by_speaker;
  int sample_rate_hz = 0;
  std::string prng;
  std::vector<std::string> created_from;
};

Summary Summarize(const CorpusManifest& m);
nlohmann::json SummaryToJson(const Summary& s);

nlohmann::json RecordToJson(const UtteranceRecord& r);
UtteranceRecord RecordFromJson(const nlohmann::json& j);

// JSON-lines body plus a `<path>.summary.json` sidecar carrying the sample
// rate and provenance. Without a sidecar `default_rate` is assumed.
CorpusManifest ReadManifest(const std::string& path, int default_rate = 22050);
void WriteManifest(const CorpusManifest& m, const std::string& path);
std::string SummaryPath(const std::string& manifest_path);

struct ValidateOptions {
  // Reject Latin letters in text (off for English pre-training manifests).
  bool require_devanagari = true;
  // Compare duration_s against WAV headers (10 ms tolerance).
  bool check_audio = false;
};

// Throws comix::Error describing the first violation.
void Validate(const CorpusManifest& m, const ValidateOptions& opts = {});

CorpusManifest Pool(const std::vector<CorpusManifest>& manifests);

// Records in seeded-shuffle order until the running duration first reaches
// target_s.
CorpusManifest SubsetByDuration(const CorpusManifest& m, double target_s, uint64_t seed);

// Speaker-stratified VAL assignment; record order is preserved.
CorpusManifest SplitManifest(const CorpusManifest& m, double val_fraction, uint64_t seed);

CorpusManifest SpeakerView(const CorpusManifest& m, const std::string& speaker_id);
CorpusManifest FilterLang(const CorpusManifest& m, Lang lang);
CorpusManifest FilterSplit(const CorpusManifest& m, Split split);

// Builds a manifest from a TSV list `id<TAB>audio<TAB>text<TAB>lang<TAB>speaker`
// reading durations from WAV headers. Relative audio paths resolve against
// the list's directory. Text is stored as given; run textnorm first.
CorpusManifest BuildFromList(const std::string& list_path, int sample_rate_hz);

}  // namespace comix::corpus

#endif  // COMIX_CORPUS_H_
