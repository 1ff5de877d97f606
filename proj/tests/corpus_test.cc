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

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "comix/error.h"
#include "support/synthetic.h"

namespace comix::corpus {
namespace {

UtteranceRecord Rec(const std::string& id, double dur, const std::string& spk = "s1", Lang lang = Lang::kHi) {
  return {id, "/data/" + id + ".wav", "नमस्ते", lang, spk, dur, Split::kTrain};
}

CorpusManifest Uniform(int n, double dur, const std::string& prefix = "u", const std::string& spk = "s1") {
  CorpusManifest m;
  for (int i = 0; i < n; ++i) m.records.push_back(Rec(prefix + std::to_string(i), dur, spk));
  return m;
}

std::set<std::string> Ids(const CorpusManifest& m) {
  std::set<std::string> ids;
  for (const auto& r : m.records) ids.insert(r.id);
  return ids;
}

TEST(PoolTest, SingletonIsIdentity) {
  CorpusManifest m = Uniform(4, 1.0);
  EXPECT_EQ(Pool({m}).records, m.records);
}

TEST(PoolTest, LanguageFractions) {
  CorpusManifest hi, en;
  hi.records.push_back(Rec("hi0", 9.75 * 3600, "p", Lang::kHi));
  en.records.push_back(Rec("en0", 5.25 * 3600, "p", Lang::kEn));
  const Summary s = Summarize(Pool({hi, en}));
  EXPECT_NEAR(s.fraction_by_lang.at("hi"), 0.65, 1e-12);
  EXPECT_NEAR(s.fraction_by_lang.at("en"), 0.35, 1e-12);
}

TEST(PoolTest, CollisionNamesTheId) {
  CorpusManifest a = Uniform(2, 1.0), b = Uniform(1, 1.0);
  try {
    Pool({a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("u0"), std::string::npos);
  }
}

TEST(PoolTest, RateMismatchThrows) {
  CorpusManifest a = Uniform(1, 1.0, "a"), b = Uniform(1, 1.0, "b");
  b.sample_rate_hz = 16000;
  EXPECT_THROW(Pool({a, b}), Error);
}

TEST(PoolTest, CommutativeUpToOrder) {
  CorpusManifest a = Uniform(3, 1.0, "a"), b = Uniform(2, 2.0, "b"), c = Uniform(1, 3.0, "c");
  EXPECT_EQ(Ids(Pool({a, b, c})), Ids(Pool({c, Pool({b, a})})));
}

TEST(SubsetTest, GreedyAccumulationCount) {
  // Ten 2 s records with a 5 s target: 2, 4, then 6 >= 5.
  const CorpusManifest m = Uniform(10, 2.0);
  for (uint64_t seed : {1u, 2u, 99u}) {
    const CorpusManifest s = SubsetByDuration(m, 5.0, seed);
    EXPECT_EQ(s.records.size(), 3u);
    EXPECT_DOUBLE_EQ(s.TotalSeconds(), 6.0);
  }
}

TEST(SubsetTest, FullTargetGivesEverything) {
  const CorpusManifest m = Uniform(7, 1.5);
  EXPECT_EQ(Ids(SubsetByDuration(m, m.TotalSeconds(), 4)), Ids(m));
}

TEST(SubsetTest, TargetAboveTotalThrowsWithBothTotals) {
  const CorpusManifest m = Uniform(3, 1.0);
  try {
    SubsetByDuration(m, 10.0, 1);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("10"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
}

TEST(SubsetTest, MonotoneAndBounded) {
  CorpusManifest m;
  for (int i = 0; i < 40; ++i) m.records.push_back(Rec("r" + std::to_string(i), 1.0 + (i % 7) * 0.5));
  std::set<std::string> prev;
  for (double target = 2.0; target < m.TotalSeconds(); target += 7.5) {
    const CorpusManifest s = SubsetByDuration(m, target, 21);
    EXPECT_GE(s.TotalSeconds(), target);
    EXPECT_LT(s.TotalSeconds(), target + 4.0);
    const auto ids = Ids(s);
    EXPECT_TRUE(std::includes(ids.begin(), ids.end(), prev.begin(), prev.end()));
    prev = ids;
  }
}

TEST(SplitTest, SingleSpeakerTenPercent) {
  const CorpusManifest s = SplitManifest(Uniform(100, 1.0), 0.1, 3);
  EXPECT_EQ(FilterSplit(s, Split::kVal).records.size(), 10u);
}

TEST(SplitTest, StratifiedBySpeaker) {
  const CorpusManifest m = Pool({Uniform(50, 1.0, "a", "spk_a"), Uniform(50, 1.0, "b", "spk_b")});
  const Summary s = Summarize(SplitManifest(m, 0.1, 3));
  EXPECT_EQ(s.val_by_speaker.at("spk_a"), 5u);
  EXPECT_EQ(s.val_by_speaker.at("spk_b"), 5u);
}

TEST(SplitTest, SmallSpeakerStillGetsValidation) {
  const CorpusManifest m = Pool({Uniform(2, 1.0, "a", "tiny"), Uniform(30, 1.0, "b", "big")});
  EXPECT_EQ(Summarize(SplitManifest(m, 0.05, 1)).val_by_speaker.at("tiny"), 1u);
}

TEST(SplitTest, DeterministicAndRejectsBadFraction) {
  const CorpusManifest m = Uniform(30, 1.0);
  EXPECT_EQ(SplitManifest(m, 0.2, 8).records, SplitManifest(m, 0.2, 8).records);
  EXPECT_THROW(SplitManifest(m, 0.0, 1), Error);
  EXPECT_THROW(SplitManifest(m, 0.5, 1), Error);
}

TEST(SpeakerViewTest, SelectsAndRejectsUnknown) {
  const CorpusManifest m = Pool({Uniform(3, 1.0, "a", "x"), Uniform(2, 1.0, "b", "y")});
  EXPECT_EQ(SpeakerView(m, "y").records.size(), 2u);
  const CorpusManifest single = Uniform(3, 1.0, "a", "x");
  EXPECT_EQ(SpeakerView(single, "x").records, single.records);
  try {
    SpeakerView(m, "z");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("x"), std::string::npos);
  }
}

TEST(ManifestIoTest, JsonLinesRoundTrip) {
  const std::string dir = testing::MakeTempDir("manifest");
  CorpusManifest m = Pool({Uniform(3, 1.25, "a", "x"), Uniform(2, 0.5, "b", "y")});
  m.records[1].split = Split::kVal;
  m.records[4].lang = Lang::kEn;
  m.sample_rate_hz = 16000;
  WriteManifest(m, dir + "/m.jsonl");
  const CorpusManifest back = ReadManifest(dir + "/m.jsonl");
  EXPECT_EQ(back.records, m.records);
  EXPECT_EQ(back.sample_rate_hz, 16000);
  std::ifstream in(dir + "/m.jsonl");
  std::string first;
  std::getline(in, first);
  const auto j = nlohmann::json::parse(first);
  for (const char* key : {"id", "audio", "text", "lang", "speaker", "duration_s", "split"}) EXPECT_TRUE(j.contains(key));
}

TEST(ValidateTest, DuplicateIdsAndLatinText) {
  CorpusManifest m = Uniform(2, 1.0);
  m.records[1].id = m.records[0].id;
  EXPECT_THROW(Validate(m), Error);
  CorpusManifest latin = Uniform(1, 1.0);
  latin.records[0].text = "hello";
  EXPECT_THROW(Validate(latin), Error);
  ValidateOptions relaxed;
  relaxed.require_devanagari = false;
  EXPECT_NO_THROW(Validate(latin, relaxed));
}

TEST(ValidateTest, DurationCheckedAgainstAudio) {
  const std::string dir = testing::MakeTempDir("validate");
  CorpusManifest m = testing::WriteToyCorpus(dir, {"का मा", "री तो"}, "spk", 8000);
  ValidateOptions opts;
  opts.check_audio = true;
  EXPECT_NO_THROW(Validate(m, opts));
  m.records[0].duration_s += 0.05;
  EXPECT_THROW(Validate(m, opts), Error);
}

TEST(BuildTest, FromList) {
  const std::string dir = testing::MakeTempDir("build");
  const CorpusManifest toy = testing::WriteToyCorpus(dir, {"का मा", "री तो"}, "spk", 8000);
  {
    std::ofstream list(dir + "/list.tsv");
    for (const auto& r : toy.records) list << r.id << "\t" << r.audio_path << "\t" << r.text << "\thi\tspk\n";
  }
  const CorpusManifest m = BuildFromList(dir + "/list.tsv", 8000);
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_NEAR(m.records[0].duration_s, toy.records[0].duration_s, 1e-9);
}

}  // namespace
}  // namespace comix::corpus
