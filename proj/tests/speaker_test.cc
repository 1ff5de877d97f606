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

#include <gtest/gtest.h>

#include <cmath>

#include "comix/error.h"
#include "comix/util/rng.h"
#include "support/synthetic.h"

namespace comix::speaker {
namespace {

audio::AudioClip Seconds(double s, int rate = 8000) {
  audio::AudioClip c;
  c.sample_rate = rate;
  c.samples.assign(static_cast<size_t>(s * rate), 0.1);
  return c;
}

// Stub oracle written out independently of the extractor.
std::vector<double> StubVector(const std::string& utt, uint64_t seed, int dim) {
  Rng rng(SeedFromKey(utt, seed));
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = rng.Normal();
    n2 += x * x;
  }
  for (double& x : v) x /= std::sqrt(n2);
  return v;
}

TEST(StubExtractorTest, UnitNormAndKeyed) {
  const StubExtractor ex(3, 64);
  const auto a = ex.Extract(Seconds(1.0), "utt_a", "");
  const auto b = ex.Extract(Seconds(1.5), "utt_a", "");
  const auto c = ex.Extract(Seconds(1.0), "utt_b", "");
  double n2 = 0.0;
  for (double v : a.vector) n2 += v * v;
  EXPECT_NEAR(n2, 1.0, 1e-12);
  EXPECT_EQ(a.vector, b.vector);
  EXPECT_NE(a.vector, c.vector);
  EXPECT_EQ(a.vector, StubVector("utt_a", 3, 64));
  EXPECT_EQ(ex.Version(), "stub:3");
}

TEST(StubExtractorTest, RejectsShortClip) {
  const StubExtractor ex;
  try {
    ex.Extract(Seconds(0.99), "u", "");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("1 s"), std::string::npos);
  }
}

TEST(TableTest, MeanMatchesOracle) {
  const std::string dir = testing::MakeTempDir("spk_table");
  const auto texts = testing::ToySentences(6, 4, 8, 10);
  corpus::CorpusManifest a = testing::WriteToyCorpus(dir + "/a", {texts[0], texts[1], texts[2]}, "A", 8000);
  corpus::CorpusManifest b =
      testing::WriteToyCorpus(dir + "/b", {texts[3], texts[4], texts[5]}, "B", 8000, corpus::Lang::kHi, 1.3);
  for (auto& r : b.records) r.id = "b_" + r.id;
  const corpus::CorpusManifest m = corpus::Pool({a, b});
  const StubExtractor ex(5, 16);
  const EmbeddingTable t = BuildTable(m, ex);
  ASSERT_EQ(t.entries.size(), 2u);
  EXPECT_EQ(t.extractor_version, "stub:5");
  for (const std::string spk : {"A", "B"}) {
    std::vector<double> mean(16, 0.0);
    int n = 0;
    for (const auto& r : m.records) {
      if (r.speaker_id != spk) continue;
      const auto v = StubVector(r.id, 5, 16);
      for (int i = 0; i < 16; ++i) mean[i] += v[i];
      ++n;
    }
    EXPECT_EQ(t.counts.at(spk), 3);
    for (int i = 0; i < 16; ++i) EXPECT_NEAR(t.entries.at(spk).vector[i], mean[i] / n, 1e-12);
  }
  const std::string path = dir + "/table.json";
  t.Save(path);
  const EmbeddingTable back = EmbeddingTable::Load(path);
  EXPECT_EQ(back.entries.at("A").vector, t.entries.at("A").vector);
  EXPECT_EQ(back.counts, t.counts);
}

TEST(TableTest, UnseenSpeakerRejected) {
  EmbeddingTable t;
  t.entries["A"].vector = {1.0};
  t.counts["A"] = 1;
  try {
    LookupSpeaker("Z", t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unseen speaker"), std::string::npos);
  }
  EXPECT_EQ(LookupSpeaker("A", t).vector, std::vector<double>{1.0});
}

TEST(TableTest, SpeakerWithoutUsableAudio) {
  const std::string dir = testing::MakeTempDir("spk_short");
  // Two-syllable sentences are well under one second.
  const corpus::CorpusManifest m = testing::WriteToyCorpus(dir, {"का मा"}, "S", 8000);
  EXPECT_THROW(BuildTable(m, StubExtractor()), Error);
}

TEST(ExternalExtractorTest, LineProtocol) {
  const std::string dir = testing::MakeTempDir("spk_ext");
  audio::WriteWav(dir + "/x.wav", Seconds(1.2));
  const ExternalExtractor ex("sh -c 'while read l; do echo 0.5 -1 2; done'", 3);
  const auto e = ExtractFile(dir + "/x.wav", ex, 8000, "x");
  EXPECT_EQ(e.vector, (std::vector<double>{0.5, -1, 2}));
  const ExternalExtractor wrong("sh -c 'while read l; do echo 1 2; done'", 3);
  EXPECT_THROW(ExtractFile(dir + "/x.wav", wrong, 8000, "x"), Error);
}

TEST(ExternalExtractorTest, UnavailableIsReported) {
  const std::string dir = testing::MakeTempDir("spk_unavail");
  audio::WriteWav(dir + "/x.wav", Seconds(1.2));
  const ExternalExtractor ex("/nonexistent/extractor-binary", 3);
  try {
    ExtractFile(dir + "/x.wav", ex, 8000, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unavailable"), std::string::npos) << e.what();
  }
  EXPECT_THROW(MakeExtractor("external", "", 0), Error);
  EXPECT_THROW(MakeExtractor("magic", "", 0), Error);
}

TEST(PolicyTest, ParseNames) {
  EXPECT_EQ(ParsePolicy("avg-embed"), Policy::kAvgEmbed);
  EXPECT_EQ(ParsePolicy("audio_embed"), Policy::kAudioEmbed);
  EXPECT_EQ(ParsePolicy("none"), Policy::kNone);
  EXPECT_THROW(ParsePolicy("both"), Error);
}

}  // namespace
}  // namespace comix::speaker
