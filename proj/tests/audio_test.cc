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

#include "comix/audio.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "comix/error.h"
#include "comix/util/rng.h"
#include "support/oracle_mel.h"
#include "support/synthetic.h"

namespace comix::audio {
namespace {

AudioConfig SmallConfig() {
  AudioConfig c;
  c.sample_rate = 8000;
  c.frame_ms = 16.0;
  c.hop_ms = 4.0;
  c.n_mels = 20;
  c.fmax = 4000.0;
  return c;
}

std::vector<double> RandomSignal(Rng& rng, size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = 0.3 * rng.Normal();
  return x;
}


TEST(AudioConfigTest, PaperWindowAndHop) {
  AudioConfig c;
  EXPECT_EQ(c.WinLength(), 1102);
  EXPECT_EQ(c.HopLength(), 265);
  EXPECT_EQ(c.FftSize(), 1102);
}

TEST(MelScaleTest, SlaneyBreakpoint) {
  EXPECT_NEAR(HzToMel(1000.0), 15.0, 1e-12);
  EXPECT_NEAR(MelToHz(HzToMel(5123.0)), 5123.0, 1e-9);
}

TEST(MelExtractorTest, MatchesDirectDftOracle) {
  const AudioConfig cfg = SmallConfig();
  MelExtractor ex(cfg);
  testing::OracleMel oracle(cfg);
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    AudioClip clip{RandomSignal(rng, 700 + 37 * trial), cfg.sample_rate, 0};
    const MelSpectrogram mel = ex.Compute(clip);
    const std::vector<double> ref = oracle.Compute(clip.samples);
    ASSERT_EQ(mel.data.size(), ref.size());
    for (size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(mel.data[i], ref[i], 1e-8) << i;
  }
}

TEST(MelExtractorTest, FrameCountMatchesOracleOnRandomLengths) {
  for (const AudioConfig& cfg : {AudioConfig{}, SmallConfig()}) {
    MelExtractor ex(cfg);
    testing::OracleMel oracle(cfg);
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
      const size_t n = cfg.HopLength() + rng.Below(4 * cfg.sample_rate);
      AudioClip clip{std::vector<double>(n, 0.01), cfg.sample_rate, 0};
      const int frames = ex.Compute(clip).frames;
      ASSERT_EQ(frames, oracle.FrameCount(n)) << n;
      ASSERT_EQ(frames, CenteredFrameCount(static_cast<int64_t>(n), cfg.HopLength()));
    }
  }
}

TEST(MelExtractorTest, SilenceIsLogEpsEverywhere) {
  AudioConfig cfg;
  MelExtractor ex(cfg);
  AudioClip clip{std::vector<double>(22050, 0.0), cfg.sample_rate, 0};
  const MelSpectrogram mel = ex.Compute(clip);
  EXPECT_EQ(mel.n_mels, 80);
  for (double v : mel.data) ASSERT_EQ(v, std::log(cfg.eps));
}

TEST(MelExtractorTest, ShiftCovarianceOnInteriorFrames) {
  const AudioConfig cfg = SmallConfig();
  MelExtractor ex(cfg);
  Rng rng(17);
  const int hop = cfg.HopLength(), k = 3;
  AudioClip x{RandomSignal(rng, 2000), cfg.sample_rate, 0};
  AudioClip y = x;
  y.samples.insert(y.samples.begin(), static_cast<size_t>(k) * hop, 0.0);
  const MelSpectrogram mx = ex.Compute(x), my = ex.Compute(y);
  const int margin = (cfg.FftSize() / 2 + hop - 1) / hop;
  int checked = 0;
  for (int t = margin; t + margin < mx.frames; ++t, ++checked) {
    for (int m = 0; m < cfg.n_mels; ++m) ASSERT_NEAR(mx.at(t, m), my.at(t + k, m), 1e-9);
  }
  EXPECT_GT(checked, 10);
}

TEST(MelExtractorTest, RejectsRateMismatch) {
  MelExtractor ex(SmallConfig());
  AudioClip clip{std::vector<double>(1000, 0.0), 16000, 0};
  EXPECT_THROW(ex.Compute(clip), Error);
}

TEST(WavTest, RoundTripSixteenBit) {
  const std::string dir = testing::MakeTempDir("wav");
  Rng rng(3);
  AudioClip clip{RandomSignal(rng, 1234), 22050, 0};
  for (double& v : clip.samples) v = std::clamp(v, -0.99, 0.99);
  WriteWav(dir + "/a.wav", clip);
  const WavInfo info = ReadWavInfo(dir + "/a.wav");
  EXPECT_EQ(info.sample_rate, 22050);
  EXPECT_EQ(info.channels, 1);
  EXPECT_EQ(info.bits_per_sample, 16);
  EXPECT_EQ(info.frames, 1234);
  const AudioClip back = LoadWav(dir + "/a.wav");
  ASSERT_EQ(back.samples.size(), clip.samples.size());
  for (size_t i = 0; i < clip.samples.size(); ++i) ASSERT_NEAR(back.samples[i], clip.samples[i], 1e-4);
  EXPECT_EQ(EncodeWav(clip), EncodeWav(clip));
}

TEST(WavTest, ResampleOnLoad) {
  const std::string dir = testing::MakeTempDir("wav_rs");
  AudioClip clip{std::vector<double>(16000, 0.0), 16000, 0};
  for (size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] = 0.5 * std::sin(2 * M_PI * 440.0 * i / 16000);
  WriteWav(dir + "/b.wav", clip);
  const AudioClip back = LoadWav(dir + "/b.wav", 22050);
  EXPECT_EQ(back.sample_rate, 22050);
  EXPECT_EQ(back.resampled_from, 16000);
  EXPECT_EQ(back.samples.size(), 22050u);
}

TEST(WavTest, MissingFileThrows) { EXPECT_THROW(LoadWav("/nonexistent/x.wav"), Error); }

TEST(FeatureFileTest, RoundTripAsFloat32) {
  const std::string path = testing::MakeTempDir("feat") + "/m.feat";
  std::vector<double> data = {0.5, -1.25, 3.0, 1.0 / 3.0, 7.0, -11.5};
  WriteFeatureFile(path, 2, 3, data);
  int rows = 0, cols = 0;
  const std::vector<double> back = ReadFeatureFile(path, &rows, &cols);
  EXPECT_EQ(rows, 2);
  EXPECT_EQ(cols, 3);
  for (size_t i = 0; i < data.size(); ++i) EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(data[i])));
  EXPECT_EQ(std::filesystem::file_size(path), 8u + 6u * 4u);
}

TEST(TrimSilenceTest, RemovesLeadingAndTrailingSilence) {
  AudioClip clip{std::vector<double>(3000, 0.0), 8000, 0};
  for (int i = 1000; i < 2000; ++i) clip.samples[i] = 0.5 * std::sin(0.3 * i);
  const AudioClip t = TrimSilence(clip, -40.0, 128, 32);
  EXPECT_LT(t.samples.size(), 1300u);
  EXPECT_GE(t.samples.size(), 1000u);
}

}  // namespace
}  // namespace comix::audio
