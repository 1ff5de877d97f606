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

#ifndef COMIX_EVALKIT_H_
#define COMIX_EVALKIT_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace comix::evalkit {

enum class Kind { kMos, kCmos };

const char* KindName(Kind k);
Kind ParseKind(const std::string& s);

// System id that CMOS ratings are adjusted towards.
inline constexpr const char* kOurs = "OURS";

struct RatingRecord {
  std::string listener;
  std::string utterance;
  Kind kind = Kind::kMos;
  double value = 0.0;
  // MOS: `first` names the rated system. CMOS: presentation order; the value
  // rates the second audio against the first.
  std::string first;
  std::string second;
  // Source line (1-based, header is line 1); 0 for records built in code.
  int line = 0;
};

struct Reject {
  int line = 0;
  std::string utterance;
  std::string reason;
};

struct RatingFile {
  std::vector<RatingRecord> records;
  // Lines that could not be parsed into a record.
  std::vector<Reject> rejects;
  int total = 0;
};

// CSV with header `listener,utterance,kind,value,first,second`.
RatingFile ParseRatings(const std::string& csv_text);
RatingFile ReadRatings(const std::string& path);
std::string FormatRatings(const std::vector<RatingRecord>& records);

struct Stat {
  double mean = 0.0;
  // Sample (n - 1) standard deviation; 0 when n = 1.
  double std = 0.0;
  int n = 0;
  bool single = false;
};

struct EvalSummary {
  Kind kind = Kind::kMos;
  Stat overall;
  // MOS: keyed by rated system. CMOS: keyed by the system OURS was compared
  // against.
  std::map<std::string, Stat> per_system;
  std::vector<Reject> rejects;
  int input_records = 0;

  nlohmann::json ToJson() const;
};

Stat Summarize(const std::vector<double>& values);

// Values must lie on the 1.0, 1.5, ..., 5.0 grid.
EvalSummary AggregateMos(const std::vector<RatingRecord>& records);
// Adjusted value = raw if second is OURS, -raw if first is OURS.
EvalSummary AggregateCmos(const std::vector<RatingRecord>& records);
// Aggregates a parsed file; parse rejects are carried into the summary.
EvalSummary Aggregate(const RatingFile& file, Kind kind);

// "4.65 +- 0.56".
std::string FormatScore(const Stat& s);

struct SessionOptions {
  Kind kind = Kind::kMos;
  // CMOS: systems[0] is ours, the reference is drawn from the rest.
  std::vector<std::string> systems;
  uint64_t seed = 0;
};

// Blank rating sheet in the rating CSV format (empty listener and value),
// rows in seeded random order. MOS: one row per utterance and system. CMOS:
// one row per utterance with a random reference and random order.
std::vector<RatingRecord> MakeSession(const std::vector<std::string>& utterances, const SessionOptions& opts);
// Utterance ids from the first column of a text manifest (TSV or one id per
// line); '#' lines and blanks are skipped.
std::vector<std::string> ReadUtteranceIds(const std::string& path);

}  // namespace comix::evalkit

#endif  // COMIX_EVALKIT_H_
