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

#include "comix/evalkit.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "comix/error.h"
#include "comix/util/rng.h"

namespace comix::evalkit {

using nlohmann::json;

namespace {

constexpr const char* kHeader = "listener,utterance,kind,value,first,second";

std::string Trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> cols;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(Trim(c));
  if (!line.empty() && line.back() == ',') cols.emplace_back();
  return cols;
}

json StatJson(const Stat& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}, {"single", s.single}, {"formatted", FormatScore(s)}};
}

}  // namespace

const char* KindName(Kind k) { return k == Kind::kMos ? "mos" : "cmos"; }

Kind ParseKind(const std::string& s) {
  if (s == "mos" || s == "MOS") return Kind::kMos;
  if (s == "cmos" || s == "CMOS") return Kind::kCmos;
  throw Error("unknown rating kind '" + s + "'");
}

RatingFile ParseRatings(const std::string& csv_text) {
  RatingFile f;
  std::istringstream in(csv_text);
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    if (!header) {
      if (Trim(line) != kHeader) throw Error(std::string("rating file: expected header '") + kHeader + "'");
      header = true;
      continue;
    }
    ++f.total;
    const std::vector<std::string> c = SplitCsv(line);
    if (c.size() != 6) {
      f.rejects.push_back({lineno, "", "expected 6 columns, got " + std::to_string(c.size())});
      continue;
    }
    RatingRecord r;
    r.listener = c[0];
    r.utterance = c[1];
    r.first = c[4];
    r.second = c[5];
    r.line = lineno;
    try {
      r.kind = ParseKind(c[2]);
    } catch (const Error&) {
      f.rejects.push_back({lineno, r.utterance, "unknown kind '" + c[2] + "'"});
      continue;
    }
    if (c[3].empty()) {
      f.rejects.push_back({lineno, r.utterance, "missing value"});
      continue;
    }
    const char* end = c[3].data() + c[3].size();
    auto [ptr, ec] = std::from_chars(c[3].data(), end, r.value);
    if (ec != std::errc() || ptr != end || !std::isfinite(r.value)) {
      f.rejects.push_back({lineno, r.utterance, "value '" + c[3] + "' is not a number"});
      continue;
    }
    f.records.push_back(std::move(r));
  }
  if (!header) throw Error(std::string("rating file: expected header '") + kHeader + "'");
  return f;
}

RatingFile ReadRatings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRatings(ss.str());
}

std::string FormatRatings(const std::vector<RatingRecord>& records) {
  std::string out = std::string(kHeader) + "\n";
  char buf[32];
  for (const auto& r : records) {
    std::string value;
    if (std::isfinite(r.value)) {
      std::snprintf(buf, sizeof(buf), "%g", r.value);
      value = buf;
    }
    out += r.listener + "," + r.utterance + "," + KindName(r.kind) + "," + value + "," + r.first + "," + r.second +
           "\n";
  }
  return out;
}

Stat Summarize(const std::vector<double>& values) {
  Stat s;
  s.n = static_cast<int>(values.size());
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.n;
  s.single = s.n == 1;
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

EvalSummary AggregateMos(const std::vector<RatingRecord>& records) {
  EvalSummary out;
  out.kind = Kind::kMos;
  out.input_records = static_cast<int>(records.size());
  std::vector<double> all;
  std::map<std::string, std::vector<double>> by_system;
  for (const auto& r : records) {
    if (r.kind != Kind::kMos) {
      out.rejects.push_back({r.line, r.utterance, "not a MOS record"});
      continue;
    }
    const double twice = 2.0 * r.value;
    if (!(r.value >= 1.0 && r.value <= 5.0)) {
      out.rejects.push_back({r.line, r.utterance, "MOS value out of range [1, 5]"});
      continue;
    }
    if (std::abs(twice - std::round(twice)) > 1e-9) {
      out.rejects.push_back({r.line, r.utterance, "MOS value off the 0.5 grid"});
      continue;
    }
    all.push_back(r.value);
    if (!r.first.empty()) by_system[r.first].push_back(r.value);
  }
  out.overall = Summarize(all);
  for (const auto& [sys, v] : by_system) out.per_system[sys] = Summarize(v);
  return out;
}

EvalSummary AggregateCmos(const std::vector<RatingRecord>& records) {
  EvalSummary out;
  out.kind = Kind::kCmos;
  out.input_records = static_cast<int>(records.size());
  std::vector<double> all;
  std::map<std::string, std::vector<double>> by_system;
  for (const auto& r : records) {
    if (r.kind != Kind::kCmos) {
      out.rejects.push_back({r.line, r.utterance, "not a CMOS record"});
      continue;
    }
    if (r.first.empty() || r.second.empty()) {
      out.rejects.push_back({r.line, r.utterance, "missing system id"});
      continue;
    }
    if (!(r.value >= -2.0 && r.value <= 2.0)) {
      out.rejects.push_back({r.line, r.utterance, "CMOS value out of range [-2, 2]"});
      continue;
    }
    const bool first_ours = r.first == kOurs, second_ours = r.second == kOurs;
    if (first_ours == second_ours) {
      out.rejects.push_back({r.line, r.utterance, std::string("exactly one system must be ") + kOurs});
      continue;
    }
    const double adjusted = second_ours ? r.value : -r.value;
    all.push_back(adjusted);
    by_system[second_ours ? r.first : r.second].push_back(adjusted);
  }
  out.overall = Summarize(all);
  for (const auto& [sys, v] : by_system) out.per_system[sys] = Summarize(v);
  return out;
}

EvalSummary Aggregate(const RatingFile& file, Kind kind) {
  EvalSummary s = kind == Kind::kMos ? AggregateMos(file.records) : AggregateCmos(file.records);
  s.rejects.insert(s.rejects.begin(), file.rejects.begin(), file.rejects.end());
  s.input_records = file.total;
  return s;
}

std::string FormatScore(const Stat& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f +- %.2f", s.mean, s.std);
  return buf;
}

json EvalSummary::ToJson() const {
  json per = json::object();
  for (const auto& [sys, st] : per_system) per[sys] = StatJson(st);
  json rej = json::array();
  for (const auto& r : rejects) rej.push_back({{"line", r.line}, {"utterance", r.utterance}, {"reason", r.reason}});
  return {{"kind", KindName(kind)},
          {"overall", StatJson(overall)},
          {"per_system", per},
          {"input_records", input_records},
          {"accepted", overall.n},
          {"rejected", rejects.size()},
          {"rejects", rej},
          {"std_convention", "sample (n-1); per-record aggregation"}};
}

std::vector<RatingRecord> MakeSession(const std::vector<std::string>& utterances, const SessionOptions& opts) {
  if (opts.systems.empty()) throw Error("session: at least one system is required");
  if (opts.kind == Kind::kCmos && opts.systems.size() < 2) throw Error("session: CMOS needs at least two systems");
  Rng rng(opts.seed);
  std::vector<RatingRecord> rows;
  const double blank = std::numeric_limits<double>::quiet_NaN();
  for (const auto& u : utterances) {
    if (opts.kind == Kind::kMos) {
      for (const auto& sys : opts.systems) rows.push_back({"", u, Kind::kMos, blank, sys, "", 0});
      continue;
    }
    const std::string& ours = opts.systems[0];
    const std::string& ref = opts.systems[1 + rng.Below(opts.systems.size() - 1)];
    const bool ours_first = rng.Below(2) == 0;
    rows.push_back({"", u, Kind::kCmos, blank, ours_first ? ours : ref, ours_first ? ref : ours, 0});
  }
  rng.Shuffle(&rows);
  return rows;
}

std::vector<std::string> ReadUtteranceIds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    ids.push_back(Trim(line.substr(0, line.find('\t'))));
  }
  return ids;
}

}  // namespace comix::evalkit
