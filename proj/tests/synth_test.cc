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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "comix/error.h"
#include "support/synthetic.h"
#include "support/toy_models.h"

namespace comix::synth {
namespace {

namespace fs = std::filesystem;

std::string ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string ErrorOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

int RunCli(const std::string& args) {
  const int status = std::system((std::string(COMIX_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct ToyCheckpoints {
  std::string dir;
  std::string taco;          // gate 0.5
  std::string taco_never;    // never stops: always truncates
  std::string taco_avg;      // avg-embed, speakers A and B
  std::string vocoder;
  std::string vocoder_other;  // different hop
};

spectrogen::TacotronConfig TinyTaco(const AudioConfig& a, bool multi) {
  spectrogen::TacotronConfig tc = spectrogen::TacotronConfigFrom(testing::ToyConfig(), multi);
  tc.encoder.embed_dim = 8;
  tc.encoder.conv_filters = 8;
  tc.encoder.bilstm_units = 8;
  tc.decoder.lstm_units = 16;
  tc.decoder.prenet = {8};
  tc.decoder.attn_dim = 8;
  tc.decoder.postnet_filters = 8;
  tc.decoder.max_steps = 12;
  tc.n_mels = a.n_mels;
  tc.speaker_dim = 4;
  return tc;
}

const ToyCheckpoints& Checkpoints() {
  static const ToyCheckpoints c = [] {
    ToyCheckpoints c;
    c.dir = testing::MakeTempDir("synth_ckpt");
    const AudioConfig a = testing::SmallAudio();
    const nlohmann::json meta = {{"audio", AudioToJson(a)}, {"speaker", {{"policy", "none"}}}};
    const auto vocab = spectrogen::CharVocabulary::Devanagari();
    c.taco = c.dir + "/taco.ckpt";
    spectrogen::SaveTacotron(c.taco, spectrogen::Tacotron2(TinyTaco(a, false), vocab, 1), meta);
    spectrogen::TacotronConfig never = TinyTaco(a, false);
    never.decoder.gate_threshold = 1.0;
    c.taco_never = c.dir + "/taco_never.ckpt";
    spectrogen::SaveTacotron(c.taco_never, spectrogen::Tacotron2(never, vocab, 1), meta);

    speaker::EmbeddingTable table;
    table.extractor_version = "stub:0";
    table.entries["A"].vector = {0.5, 0.5, 0.5, 0.5};
    table.entries["B"].vector = {0.5, -0.5, 0.5, -0.5};
    table.counts = {{"A", 1}, {"B", 1}};
    const nlohmann::json avg_meta = {{"audio", AudioToJson(a)},
                                     {"speaker", {{"policy", "avg_embed"}, {"table", table.ToJson()}}}};
    c.taco_avg = c.dir + "/taco_avg.ckpt";
    spectrogen::SaveTacotron(c.taco_avg, spectrogen::Tacotron2(TinyTaco(a, true), vocab, 2), avg_meta);

    c.vocoder = c.dir + "/voc.ckpt";
    vocoder::SaveWaveglow(c.vocoder, vocoder::Waveglow(testing::SmallWaveglow(), a, 3), {});
    AudioConfig other = a;
    other.hop_ms = 5.0;
    c.vocoder_other = c.dir + "/voc_other.ckpt";
    vocoder::SaveWaveglow(c.vocoder_other, vocoder::Waveglow(testing::SmallWaveglow(), other, 3), {});
    return c;
  }();
  return c;
}

TEST(SynthTest, DurationLaw) {
  Synthesizer s(Checkpoints().taco_never, Checkpoints().vocoder);
  SynthOptions o;
  o.max_steps = 9;
  const SynthResult r = s.Synthesize("का मा", {}, o, "u1");
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.frames, 9);
  EXPECT_EQ(r.clip.samples.size(), static_cast<size_t>(9 * testing::SmallAudio().HopLength()));
  EXPECT_EQ(r.clip.sample_rate, 8000);
  EXPECT_EQ(r.mel.shape(), (nn::Shape{9, 20}));
  EXPECT_EQ(r.attention.shape(), (nn::Shape{9, 6}));
}

TEST(SynthTest, LatinTextReachesEncoderAsDevanagari) {
  Synthesizer s(Checkpoints().taco, Checkpoints().vocoder);
  const SynthResult r = s.Synthesize("नया phone", {}, {}, "u");
  for (char ch : r.encoder_text) EXPECT_FALSE(std::isalpha(static_cast<unsigned char>(ch))) << r.encoder_text;
}

TEST(SynthTest, ByteIdenticalOutputs) {
  const std::string a = testing::MakeTempDir("synth_a"), b = testing::MakeTempDir("synth_b");
  for (const std::string& dir : {a, b}) {
    Synthesizer s(Checkpoints().taco_never, Checkpoints().vocoder);
    SynthOptions o;
    o.max_steps = 6;
    o.seed = 17;
    WriteOutputs(s.Synthesize("री तो", {}, o, "x"), dir, "x");
  }
  for (const char* ext : {".wav", ".mel.png", ".attn.png", ".mel.feat", ".attn.feat"}) {
    const std::string fa = ReadBytes(a + "/x" + ext);
    EXPECT_FALSE(fa.empty()) << ext;
    EXPECT_EQ(fa, ReadBytes(b + "/x" + ext)) << ext;
  }
  int rows = 0, cols = 0;
  audio::ReadFeatureFile(a + "/x.mel.feat", &rows, &cols);
  EXPECT_EQ(rows, 6);
  EXPECT_EQ(cols, 20);
  EXPECT_EQ(audio::LoadWav(a + "/x.wav").samples.size(), static_cast<size_t>(6 * testing::SmallAudio().HopLength()));
}

TEST(SynthTest, SeedAndKeyChangeNoise) {
  Synthesizer s(Checkpoints().taco_never, Checkpoints().vocoder);
  SynthOptions o;
  o.max_steps = 4;
  const auto base = s.Synthesize("का", {}, o, "k").clip.samples;
  EXPECT_EQ(base, s.Synthesize("का", {}, o, "k").clip.samples);
  EXPECT_NE(base, s.Synthesize("का", {}, o, "k2").clip.samples);
  o.seed = 1;
  EXPECT_NE(base, s.Synthesize("का", {}, o, "k").clip.samples);
}

TEST(SynthTest, SpeakerArgumentMustMatchPolicy) {
  Synthesizer single(Checkpoints().taco, Checkpoints().vocoder);
  EXPECT_EQ(ErrorOf([&] { single.Synthesize("का", {"A", ""}, {}); }), "model is single-speaker");
  Synthesizer avg(Checkpoints().taco_avg, Checkpoints().vocoder);
  EXPECT_EQ(avg.policy(), speaker::Policy::kAvgEmbed);
  SynthOptions o;
  o.max_steps = 5;
  EXPECT_NO_THROW(avg.Synthesize("का", {"A", ""}, o));
  EXPECT_NE(ErrorOf([&] { avg.Synthesize("का", {"Z", ""}, o); }).find("unseen speaker"), std::string::npos);
  EXPECT_THROW(avg.Synthesize("का", {}, o), Error);
}

TEST(SynthTest, AudioConfigMismatch) {
  EXPECT_NE(ErrorOf([] { Synthesizer(Checkpoints().taco, Checkpoints().vocoder_other); }).find("audio config mismatch"),
            std::string::npos);
}

TEST(SynthBatchTest, MalformedItemIsIsolated) {
  Synthesizer s(Checkpoints().taco_never, Checkpoints().vocoder);
  const std::string out = testing::MakeTempDir("synth_batch");
  SynthOptions o;
  o.max_steps = 4;
  const std::vector<BatchItem> items = {{"a", "का मा", {}}, {"bad", "   ", {}}, {"c", "री", {}}};
  const BatchReport r = BatchSynthesize(s, items, o, out);
  EXPECT_EQ(r.failures(), 1);
  EXPECT_EQ(r.truncations(), 2);
  EXPECT_TRUE(fs::exists(out + "/a.wav"));
  EXPECT_FALSE(fs::exists(out + "/bad.wav"));
  EXPECT_TRUE(fs::exists(out + "/c.wav"));
  const auto j = nlohmann::json::parse(ReadBytes(out + "/report.json"));
  EXPECT_EQ(j["failures"], 1);
  EXPECT_EQ(j["items"][1]["ok"], false);
  EXPECT_NEAR(j["items"][0]["duration_s"].get<double>(), 4 * 32 / 8000.0, 1e-12);
}

TEST(SynthBatchTest, EmptyManifestSucceeds) {
  Synthesizer s(Checkpoints().taco, Checkpoints().vocoder);
  const std::string dir = testing::MakeTempDir("synth_empty");
  std::ofstream(dir + "/m.tsv") << "# nothing here\n\n";
  const auto items = ReadTextManifest(dir + "/m.tsv");
  EXPECT_TRUE(items.empty());
  const BatchReport r = BatchSynthesize(s, items, {}, dir + "/out");
  EXPECT_TRUE(r.entries.empty());
  EXPECT_EQ(nlohmann::json::parse(ReadBytes(dir + "/out/report.json"))["count"], 0);
}

TEST(SynthBatchTest, ManifestParsing) {
  const std::string dir = testing::MakeTempDir("synth_tsv");
  std::ofstream(dir + "/m.tsv") << "u1\tका मा\n# c\nu2\tरी\tA\n";
  const auto items = ReadTextManifest(dir + "/m.tsv");
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[1].speaker.speaker_id, "A");
  std::ofstream(dir + "/bad.tsv") << "only-one-column\n";
  EXPECT_THROW(ReadTextManifest(dir + "/bad.tsv"), Error);
}

TEST(SynthCliTest, ExitCodes) {
  const ToyCheckpoints& c = Checkpoints();
  const std::string out = testing::MakeTempDir("synth_cli");
  const std::string pair = " --taco " + c.taco + " --vocoder " + c.vocoder + " --out " + out;
  const std::string never = " --taco " + c.taco_never + " --vocoder " + c.vocoder + " --out " + out;
  EXPECT_EQ(RunCli("synth --text 'का' --max-steps 200" + pair), 0);
  EXPECT_EQ(RunCli("synth --text 'का' --max-steps 3" + never), 3);
  std::ofstream(out + "/m.tsv") << "a\tका\nb\t   \n";
  EXPECT_EQ(RunCli("synth --manifest " + out + "/m.tsv --max-steps 3" + never), 4);
  EXPECT_EQ(RunCli("synth --text 'का' --speaker-id A" + pair), 1);
  EXPECT_NE(RunCli("synth --text 'का'"), 0);
  EXPECT_NE(RunCli("synth --text 'का' --manifest x" + pair), 0);
}

}  // namespace
}  // namespace comix::synth
