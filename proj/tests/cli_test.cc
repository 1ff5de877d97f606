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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "comix/config.h"
#include "comix/corpus.h"
#include "comix/evalkit.h"
#include "comix/recipes.h"
#include "comix/speaker.h"
#include "comix/util/utf8.h"
#include "support/synthetic.h"
#include "support/toy_models.h"

namespace comix {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun Cli(const std::string& args) {
  CliRun r;
  FILE* p = popen((std::string(COMIX_CLI_PATH) + " " + args + " 2>/dev/null").c_str(), "r");
  if (!p) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

size_t CountFiles(const std::string& dir) {
  size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
  return n;
}

TEST(CliTest, TextnormPipesToDevanagari) {
  const std::string dir = testing::MakeTempDir("cli_tn");
  std::ofstream(dir + "/in.txt") << "नया phone EMI पर\n42 rupees\n";
  const CliRun r = Cli("textnorm --in " + dir + "/in.txt");
  ASSERT_EQ(r.code, 0);
  for (char32_t c : utf8::Decode(r.out)) EXPECT_FALSE(utf8::IsAsciiLetter(c) || utf8::IsAsciiDigit(c)) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}

TEST(CliTest, CorpusCommands) {
  const std::string dir = testing::MakeTempDir("cli_corpus");
  const auto a = testing::WriteToyCorpus(dir + "/a", testing::ToySentences(20, 1, 4, 6), "A", 22050);
  const auto b = testing::WriteToyCorpus(dir + "/b", testing::ToySentences(10, 2, 4, 6), "B", 22050,
                                         corpus::Lang::kEn);
  corpus::WriteManifest(a, dir + "/a.jsonl");
  corpus::WriteManifest(b, dir + "/b.jsonl");
  ASSERT_EQ(Cli("corpus pool --manifest " + dir + "/a.jsonl --manifest " + dir + "/b.jsonl --out " + dir +
                "/p.jsonl")
                .code,
            0);
  EXPECT_EQ(corpus::ReadManifest(dir + "/p.jsonl").records.size(), 30u);
  const CliRun stats = Cli("corpus stats --check-audio --manifest " + dir + "/p.jsonl");
  ASSERT_EQ(stats.code, 0);
  EXPECT_NE(stats.out.find("\"A\""), std::string::npos);
  ASSERT_EQ(Cli("corpus split --manifest " + dir + "/p.jsonl --val-fraction 0.1 --out " + dir + "/s.jsonl").code, 0);
  const auto split = corpus::ReadManifest(dir + "/s.jsonl");
  EXPECT_EQ(corpus::FilterSplit(split, corpus::Split::kVal).records.size(), 3u);
  ASSERT_EQ(Cli("corpus view --manifest " + dir + "/p.jsonl --speaker B --out " + dir + "/v.jsonl").code, 0);
  EXPECT_EQ(corpus::ReadManifest(dir + "/v.jsonl").records.size(), 10u);
  const double hours = a.TotalSeconds() / 2 / 3600.0;
  ASSERT_EQ(Cli("corpus subset --manifest " + dir + "/a.jsonl --target-hours " + std::to_string(hours) + " --out " +
                dir + "/sub.jsonl")
                .code,
            0);
  EXPECT_GE(corpus::ReadManifest(dir + "/sub.jsonl").TotalSeconds(), hours * 3600.0 - 1e-3);
  EXPECT_EQ(Cli("corpus subset --manifest " + dir + "/a.jsonl --target-hours 100 --out " + dir + "/x.jsonl").code,
            1);
  EXPECT_EQ(Cli("speaker build-table --manifest " + dir + "/p.jsonl --out " + dir + "/t.json").code, 0);
  EXPECT_EQ(speaker::EmbeddingTable::Load(dir + "/t.json").entries.size(), 2u);
}

TEST(CliTest, PlanMatrixWritesSpecs) {
  const std::string dir = testing::MakeTempDir("cli_plan");
  const CliRun r = Cli("plan-matrix --out " + dir + "/specs --with-pretraining --manifest primary=p.jsonl --manifest " +
                    "primary_hi=ph.jsonl --manifest multi=m.jsonl --manifest english=e.jsonl");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(CountFiles(dir + "/specs"), 14u);
  EXPECT_EQ(recipes::LoadSpec(dir + "/specs/mix_pretrain.json").stage, recipes::Stage::kMixPretrain);
  EXPECT_EQ(Cli("plan-matrix --out " + dir + "/x --manifest primary=p.jsonl").code, 1);
}

TEST(CliTest, EvalSessionAndAggregate) {
  const std::string dir = testing::MakeTempDir("cli_eval");
  std::ofstream(dir + "/test.tsv") << "u1\tएक\nu2\tदो\n";
  ASSERT_EQ(Cli("eval make-session --kind cmos --in " + dir + "/test.tsv --systems OURS REF --seed 3 --out " + dir +
                "/session.csv")
                .code,
            0);
  const auto session = evalkit::ReadRatings(dir + "/session.csv");
  EXPECT_EQ(session.total, 2);
  std::ofstream(dir + "/mos.csv") << "listener,utterance,kind,value,first,second\n"
                                     "a,u1,mos,4,S,\na,u2,mos,4.5,S,\nb,u1,mos,5,S,\nb,u2,mos,9,S,\n";
  const CliRun r = Cli("eval aggregate --kind mos --in " + dir + "/mos.csv --out " + dir + "/summary.json");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "mos 4.50 +- 0.50 (n=3, rejected=1)\n");
  std::ifstream in(dir + "/summary.json");
  EXPECT_EQ(nlohmann::json::parse(in)["input_records"], 4);
}

TEST(CliTest, ConfigErrorsAreReported) {
  const std::string dir = testing::MakeTempDir("cli_cfg");
  std::ofstream(dir + "/bad.json") << R"({"version": "1", "audio": {"hop": 12}})";
  std::ofstream(dir + "/t.txt") << "नमस्ते\n";
  const std::string cmd = std::string(COMIX_CLI_PATH) + " textnorm --in " + dir + "/t.txt --config " + dir +
                          "/bad.json 2>&1 >/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  char buf[512] = {0};
  const size_t n = fread(buf, 1, sizeof(buf) - 1, p);
  const int status = pclose(p);
  EXPECT_EQ(WEXITSTATUS(status), 1);
  EXPECT_NE(std::string(buf, n).find("audio.hop"), std::string::npos) << buf;
  EXPECT_NE(Cli("").code, 0);
  EXPECT_NE(Cli("no-such-command").code, 0);
}

TEST(CliTest, TrainAndTrainVocoder) {
  const std::string dir = testing::MakeTempDir("cli_train");
  ToolkitConfig cfg = testing::ToyConfig();
  cfg.encoder.embed_dim = cfg.encoder.conv_filters = cfg.encoder.bilstm_units = 8;
  cfg.decoder.lstm_units = 16;
  cfg.decoder.prenet = {8};
  cfg.decoder.attn_dim = 8;
  cfg.decoder.postnet_filters = 8;
  cfg.audio = testing::SmallAudio();
  cfg.waveglow = testing::SmallWaveglow();
  SaveConfig(cfg, dir + "/config.json");
  const auto m = testing::WriteToyCorpus(dir + "/wav", testing::ToySentences(3, 5, 6, 8), "A", 8000);
  corpus::WriteManifest(m, dir + "/m.jsonl");
  recipes::RecipeSpec spec;
  spec.name = "tiny";
  spec.stage = recipes::Stage::kMixPretrain;
  spec.manifest = dir + "/m.jsonl";
  spec.batch_size = 2;
  spec.max_steps = 2;
  spec.out_dir = dir + "/run";
  recipes::SaveSpec(spec, dir + "/spec.json");
  const CliRun t = Cli("train --config " + dir + "/config.json --recipe " + dir + "/spec.json");
  ASSERT_EQ(t.code, 0);
  EXPECT_EQ(nlohmann::json::parse(t.out)["steps_run"], 2);
  EXPECT_TRUE(fs::exists(dir + "/run/final.ckpt"));
  const CliRun v = Cli("train-vocoder --config " + dir + "/config.json --manifest " + dir + "/m.jsonl --steps 3 --out " +
                    dir + "/voc.ckpt");
  ASSERT_EQ(v.code, 0);
  EXPECT_EQ(nlohmann::json::parse(v.out)["losses"].size(), 3u);
  const CliRun s = Cli("synth --config " + dir + "/config.json --text 'का मा' --max-steps 20 --taco " + dir +
                    "/run/final.ckpt --vocoder " + dir + "/voc.ckpt --out " + dir + "/out");
  ASSERT_TRUE(s.code == 0 || s.code == 3) << s.code;
  const auto j = nlohmann::json::parse(s.out);
  EXPECT_EQ(j["samples"].get<int>(), j["frames"].get<int>() * cfg.audio.HopLength());
}

}  // namespace
}  // namespace comix
