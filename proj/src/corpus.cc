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

#include "comix/corpus.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "comix/audio.h"
#include "comix/error.h"
#include "comix/util/rng.h"
#include "comix/util/utf8.h"

namespace comix::corpus {

using nlohmann::json;

const char* LangName(Lang l) { return l == Lang::kHi ? "hi" : "en"; }

Lang ParseLang(const std::string& s) {
  if (s == "hi" || s == "HI") return Lang::kHi;
  if (s == "en" || s == "EN") return Lang::kEn;
  throw Error("unknown language '" + s + "' (expected hi|en)");
}

double CorpusManifest::TotalSeconds() const {
  double total = 0.0;
  for (const auto& r : records) total += r.duration_s;
  return total;
}

std::vector<std::string> CorpusManifest::Speakers() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.speaker_id);
  return {s.begin(), s.end()};
}

Summary Summarize(const CorpusManifest& m) {
  Summary s;
  s.n_records = m.records.size();
  s.sample_rate_hz = m.sample_rate_hz;
  s.prng = std::string(Rng::kAlgorithm);
  s.created_from = m.created_from;
  for (const auto& r : m.records) {
    s.total_s += r.duration_s;
    s.seconds_by_lang[LangName(r.lang)] += r.duration_s;
    s.seconds_by_speaker[r.speaker_id] += r.duration_s;
    if (r.split == Split::kVal) ++s.val_by_speaker[r.speaker_id];
  }
  for (const auto& [lang, secs] : s.seconds_by_lang) {
    s.fraction_by_lang[lang] = s.total_s > 0 ? secs / s.total_s : 0.0;
  }
  return s;
}

json SummaryToJson(const Summary& s) {
  return json{{"n_records", s.n_records},
              {"total_s", s.total_s},
              {"total_hours", s.total_s / 3600.0},
              {"seconds_by_lang", s.seconds_by_lang},
              {"fraction_by_lang", s.fraction_by_lang},
              {"seconds_by_speaker", s.seconds_by_speaker},
              {"val_by_speaker", s.val_by_speaker},
              {"sample_rate_hz", s.sample_rate_hz},
              {"prng", s.prng},
              {"created_from", s.created_from}};
}

json RecordToJson(const UtteranceRecord& r) {
  return json{{"id", r.id},
              {"audio", r.audio_path},
              {"text", r.text},
              {"lang", LangName(r.lang)},
              {"speaker", r.speaker_id},
              {"duration_s", r.duration_s},
              {"split", r.split == Split::kVal ? "val" : "train"}};
}

UtteranceRecord RecordFromJson(const json& j) {
  UtteranceRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.audio_path = j.at("audio").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.lang = ParseLang(j.at("lang").get<std::string>());
    r.speaker_id = j.at("speaker").get<std::string>();
    r.duration_s = j.at("duration_s").get<double>();
    std::string split = j.value("split", std::string("train"));
    if (split == "train") {
      r.split = Split::kTrain;
    } else if (split == "val") {
      r.split = Split::kVal;
    } else {
      throw Error("unknown split '" + split + "'");
    }
  } catch (const json::exception& e) {
    throw Error(std::string("manifest record: ") + e.what());
  }
  return r;
}

std::string SummaryPath(const std::string& manifest_path) { return manifest_path + ".summary.json"; }

CorpusManifest ReadManifest(const std::string& path, int default_rate) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path + "'");
  CorpusManifest m;
  m.sample_rate_hz = default_rate;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(RecordFromJson(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error("manifest '" + path + "' line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("manifest '" + path + "' line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::ifstream side(SummaryPath(path));
  if (side) {
    json s = json::parse(side);
    m.sample_rate_hz = s.value("sample_rate_hz", default_rate);
    m.created_from = s.value("created_from", std::vector<std::string>{});
  }
  if (m.created_from.empty()) m.created_from.push_back(path);
  return m;
}

void WriteManifest(const CorpusManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path + "'");
  for (const auto& r : m.records) out << RecordToJson(r).dump() << "\n";
  std::ofstream side(SummaryPath(path));
  side << SummaryToJson(Summarize(m)).dump(2) << "\n";
}

void Validate(const CorpusManifest& m, const ValidateOptions& opts) {
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (r.id.empty()) throw Error("record with empty id");
    if (!ids.insert(r.id).second) throw Error("duplicate id '" + r.id + "'");
    if (!(r.duration_s > 0)) throw Error("record '" + r.id + "': duration_s must be > 0");
    if (opts.require_devanagari) {
      for (char32_t c : utf8::Decode(r.text)) {
        if (utf8::IsAsciiLetter(c)) {
          throw Error("record '" + r.id + "': text contains Latin letters");
        }
      }
    }
    if (opts.check_audio) {
      audio::WavInfo info = audio::ReadWavInfo(r.audio_path);
      if (info.sample_rate != m.sample_rate_hz) {
        throw Error("record '" + r.id + "': audio rate " + std::to_string(info.sample_rate) +
                    " != manifest rate " + std::to_string(m.sample_rate_hz));
      }
      if (std::abs(info.Duration() - r.duration_s) > 0.010) {
        throw Error("record '" + r.id + "': duration_s " + std::to_string(r.duration_s) +
                    " differs from audio " + std::to_string(info.Duration()) + " by > 10 ms");
      }
    }
  }
}

CorpusManifest Pool(const std::vector<CorpusManifest>& manifests) {
  CorpusManifest out;
  if (manifests.empty()) return out;
  out.sample_rate_hz = manifests.front().sample_rate_hz;
  std::map<std::string, int> seen;
  std::vector<std::string> collisions;
  for (const auto& m : manifests) {
    if (m.sample_rate_hz != out.sample_rate_hz) {
      throw Error("sample-rate mismatch: " + std::to_string(m.sample_rate_hz) + " vs " +
                  std::to_string(out.sample_rate_hz));
    }
    for (const auto& r : m.records) {
      if (seen[r.id]++ == 1) collisions.push_back(r.id);
      out.records.push_back(r);
    }
    out.created_from.insert(out.created_from.end(), m.created_from.begin(), m.created_from.end());
  }
  if (!collisions.empty()) {
    std::string msg = "id collision:";
    for (const auto& id : collisions) msg += " " + id;
    throw Error(msg);
  }
  return out;
}

CorpusManifest SubsetByDuration(const CorpusManifest& m, double target_s, uint64_t seed) {
  const double total = m.TotalSeconds();
  if (target_s > total * (1.0 + 1e-12)) {
    throw Error("subset target " + std::to_string(target_s) + " s exceeds corpus total " +
                std::to_string(total) + " s");
  }
  std::vector<size_t> order(m.records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(&order);
  CorpusManifest out;
  out.sample_rate_hz = m.sample_rate_hz;
  out.created_from = m.created_from;
  double acc = 0.0;
  for (size_t idx : order) {
    if (acc >= target_s) break;
    out.records.push_back(m.records[idx]);
    acc += m.records[idx].duration_s;
  }
  return out;
}

CorpusManifest SplitManifest(const CorpusManifest& m, double val_fraction, uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 0.5)) {
    throw Error("val_fraction must lie in (0, 0.5)");
  }
  CorpusManifest out = m;
  std::map<std::string, std::vector<size_t>> by_speaker;
  for (size_t i = 0; i < out.records.size(); ++i) {
    out.records[i].split = Split::kTrain;
    by_speaker[out.records[i].speaker_id].push_back(i);
  }
  Rng rng(seed);
  for (auto& [speaker, idx] : by_speaker) {
    const size_t n = idx.size();
    auto n_val = static_cast<size_t>(std::lround(val_fraction * static_cast<double>(n)));
    if (n >= 2) n_val = std::clamp<size_t>(n_val, 1, n - 1);
    rng.Shuffle(&idx);
    for (size_t k = 0; k < n_val; ++k) out.records[idx[k]].split = Split::kVal;
  }
  return out;
}

CorpusManifest SpeakerView(const CorpusManifest& m, const std::string& speaker_id) {
  CorpusManifest out;
  out.sample_rate_hz = m.sample_rate_hz;
  out.created_from = m.created_from;
  for (const auto& r : m.records) {
    if (r.speaker_id == speaker_id) out.records.push_back(r);
  }
  if (out.records.empty()) {
    std::string known;
    for (const auto& s : m.Speakers()) known += (known.empty() ? "" : ", ") + s;
    throw Error("unknown speaker '" + speaker_id + "'; known speakers: " + known);
  }
  return out;
}

CorpusManifest FilterLang(const CorpusManifest& m, Lang lang) {
  CorpusManifest out;
  out.sample_rate_hz = m.sample_rate_hz;
  out.created_from = m.created_from;
  for (const auto& r : m.records) {
    if (r.lang == lang) out.records.push_back(r);
  }
  return out;
}

CorpusManifest FilterSplit(const CorpusManifest& m, Split split) {
  CorpusManifest out;
  out.sample_rate_hz = m.sample_rate_hz;
  out.created_from = m.created_from;
  for (const auto& r : m.records) {
    if (r.split == split) out.records.push_back(r);
  }
  return out;
}

CorpusManifest BuildFromList(const std::string& list_path, int sample_rate_hz) {
  std::ifstream in(list_path);
  if (!in) throw Error("cannot open list '" + list_path + "'");
  namespace fs = std::filesystem;
  fs::path base = fs::path(list_path).parent_path();
  CorpusManifest m;
  m.sample_rate_hz = sample_rate_hz;
  m.created_from.push_back(list_path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 5) {
      throw Error("list '" + list_path + "' line " + std::to_string(lineno) +
                  ": expected 5 TAB-separated fields");
    }
    UtteranceRecord r;
    r.id = f[0];
    fs::path audio = f[1];
    if (audio.is_relative()) audio = base / audio;
    r.audio_path = audio.string();
    r.text = f[2];
    r.lang = ParseLang(f[3]);
    r.speaker_id = f[4];
    audio::WavInfo info = audio::ReadWavInfo(r.audio_path);
    if (info.sample_rate != sample_rate_hz) {
      throw Error("record '" + r.id + "': audio rate " + std::to_string(info.sample_rate) +
                  " != " + std::to_string(sample_rate_hz));
    }
    r.duration_s = info.Duration();
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace comix::corpus
