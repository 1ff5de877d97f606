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

#include "comix/spectrogen.h"

#include <gtest/gtest.h>

#include <cmath>

#include "comix/audio.h"
#include "comix/error.h"
#include "support/synthetic.h"
#include "support/toy_models.h"

namespace comix::spectrogen {
namespace {

TacotronConfig Tiny(bool multi = false) {
  TacotronConfig tc = TacotronConfigFrom(testing::ToyConfig(), multi);
  tc.encoder.embed_dim = 8;
  tc.encoder.conv_filters = 8;
  tc.encoder.bilstm_units = 8;
  tc.decoder.lstm_units = 16;
  tc.decoder.prenet = {8};
  tc.decoder.attn_dim = 8;
  tc.decoder.postnet_filters = 8;
  tc.n_mels = 6;
  tc.speaker_dim = 4;
  return tc;
}

TEST(VocabularyTest, EncodeAppendsEosAndRoundTrips) {
  const CharVocabulary v = CharVocabulary::Devanagari();
  const std::vector<int> ids = v.Encode("का मा");
  ASSERT_EQ(ids.size(), 6u);
  EXPECT_EQ(ids.back(), CharVocabulary::kEos);
  EXPECT_EQ(v.Decode({ids.begin(), ids.end() - 1}), "का मा");
  EXPECT_EQ(CharVocabulary::FromJson(v.ToJson()), v);
}

TEST(VocabularyTest, UnknownCharacterNamed) {
  try {
    CharVocabulary::Devanagari().Encode("काx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(CharVocabulary::Roman().Encode("Hello, world?"));
}

TEST(BatchTest, MasksAndStopTargets) {
  const MelBatch mb = MelBatch::FromMels({nn::Tensor({3, 2}, 1.0), nn::Tensor({5, 2}, 2.0)}, -4.0);
  ASSERT_EQ(mb.max_frames, 5);
  EXPECT_EQ(mb.mask, (std::vector<double>{1, 1, 1, 0, 0, 1, 1, 1, 1, 1}));
  EXPECT_EQ(mb.stops.vec(), (std::vector<double>{0, 0, 1, 0, 0, 0, 0, 0, 0, 1}));
  EXPECT_EQ(mb.mels.data()[3 * 2], -4.0);
  const TextBatch tb = TextBatch::FromSequences({{2, 3, 1}, {4, 1}});
  EXPECT_EQ(tb.ids, (std::vector<int>{2, 3, 1, 4, 1, 0}));
  EXPECT_EQ(tb.lengths, (std::vector<int>{3, 2}));
}

TEST(TacotronTest, GradientCheck) {
  const auto samples = testing::TacotronGradientCheck(11);
  ASSERT_EQ(samples.size(), 10u);
  for (const auto& s : samples) {
    EXPECT_LE(s.rel_error, 1e-3) << s.name << "[" << s.index << "] analytic " << s.analytic << " numeric "
                                 << s.numeric;
  }
}

TEST(TacotronTest, GradientCheckWithGuidedAttention) {
  const auto samples = testing::TacotronGradientCheck(11, 10, 1e-6, 2.0);
  ASSERT_EQ(samples.size(), 10u);
  for (const auto& s : samples) EXPECT_LE(s.rel_error, 1e-3) << s.name << "[" << s.index << "]";
}

TEST(TacotronTest, GuidedAttentionTermMatchesHandSum) {
  TacotronConfig tc = Tiny();
  tc.decoder.guided_attention_weight = 0.5;
  tc.decoder.guided_attention_sigma = 0.3;
  Tacotron2 model(tc, CharVocabulary::Devanagari(), 4);
  model.SetTraining(false);
  const CharVocabulary& v = model.vocab();
  const TextBatch tb = TextBatch::FromSequences({v.Encode("का"), v.Encode("मा री")});
  const MelBatch mb = MelBatch::FromMels({nn::Tensor({4, 6}, 0.5), nn::Tensor({7, 6}, -0.5)}, -11.5);
  const SpectrogenOutput out = model.Forward(tb, mb);
  const LossTerms l = model.Loss(out, mb);
  ASSERT_TRUE(l.guided_attention.defined());

  double sum = 0.0;
  for (int b = 0; b < 2; ++b) {
    const int T = mb.lengths[b], L = tb.lengths[b];
    const nn::Tensor a = out.Attention(b, L);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < L; ++k) {
        const double d = static_cast<double>(k) / L - static_cast<double>(t) / T;
        sum += a[t * L + k] * (1.0 - std::exp(-d * d / (2 * 0.3 * 0.3)));
      }
    }
  }
  const double guide = sum / (4 + 7);
  EXPECT_NEAR(l.guided_attention.value().item(), guide, 1e-12);
  EXPECT_GT(guide, 0.0);
  EXPECT_LT(guide, 1.0);
  const double base = l.mel_pre_mse.value().item() + l.mel_post_mse.value().item() + l.stop_bce.value().item();
  EXPECT_NEAR(l.total.value().item(), base + 0.5 * guide, 1e-12);

  tc.decoder.guided_attention_weight = 0.0;
  Tacotron2 plain(tc, CharVocabulary::Devanagari(), 4);
  EXPECT_FALSE(plain.Loss(plain.Forward(tb, mb), mb).guided_attention.defined());
}

TEST(TacotronTest, TeacherForcedShapesAndPaddingIgnored) {
  Tacotron2 model(Tiny(), CharVocabulary::Devanagari(), 3);
  const CharVocabulary& v = model.vocab();
  const TextBatch tb = TextBatch::FromSequences({v.Encode("का"), v.Encode("मा री")});
  const MelBatch mb = MelBatch::FromMels({nn::Tensor({4, 6}, 0.5), nn::Tensor({7, 6}, -0.5)}, -11.5);
  const SpectrogenOutput out = model.Forward(tb, mb);
  EXPECT_EQ(out.mel_post.shape(), (nn::Shape{2, 7, 6}));
  EXPECT_EQ(out.frames, (std::vector<int>{4, 7}));
  EXPECT_EQ(out.MelPost(0).shape(), (nn::Shape{4, 6}));
  EXPECT_EQ(out.Attention(0, 3).shape(), (nn::Shape{4, 3}));
  // Attention rows sum to one over the real characters only.
  const nn::Tensor a = out.Attention(0, 3);
  for (int t = 0; t < 4; ++t) {
    EXPECT_NEAR(a.data()[t * 3] + a.data()[t * 3 + 1] + a.data()[t * 3 + 2], 1.0, 1e-9);
  }
  const double loss = model.Loss(out, mb).total.value().item();
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_GT(loss, 0.0);
}

TEST(TacotronTest, InferenceStopsOrTruncates) {
  Tacotron2 model(Tiny(), CharVocabulary::Devanagari(), 5);
  const std::vector<int> ids = model.vocab().Encode("का मा");
  const SpectrogenOutput never = model.Infer(ids, nullptr, 7, 1.0);
  EXPECT_TRUE(never.truncated);
  EXPECT_EQ(never.frames[0], 7);
  EXPECT_EQ(never.MelPost(0).shape(), (nn::Shape{7, 6}));
  const SpectrogenOutput first = model.Infer(ids, nullptr, 7, 0.0);
  EXPECT_FALSE(first.truncated);
  EXPECT_EQ(first.frames[0], 1);
}

TEST(TacotronTest, InferenceDeterministicUnderReseed) {
  Tacotron2 model(Tiny(), CharVocabulary::Devanagari(), 5);
  const std::vector<int> ids = model.vocab().Encode("री तो");
  model.Reseed(9);
  const nn::Tensor a = model.Infer(ids, nullptr, 6, 1.0).MelPost(0);
  model.Reseed(9);
  const nn::Tensor b = model.Infer(ids, nullptr, 6, 1.0).MelPost(0);
  EXPECT_EQ(a, b);
}

TEST(TacotronTest, SpeakerEmbeddingChangesOutput) {
  Tacotron2 model(Tiny(true), CharVocabulary::Devanagari(), 2);
  const std::vector<int> ids = model.vocab().Encode("का मा");
  const nn::Tensor s1({1, 4}, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  const nn::Tensor s2({1, 4}, std::vector<double>{0.5, -0.5, 0.5, -0.5});
  model.Reseed(1);
  const nn::Tensor a = model.Infer(ids, &s1, 8, 1.0).MelPost(0);
  model.Reseed(1);
  const nn::Tensor b = model.Infer(ids, &s2, 8, 1.0).MelPost(0);
  double diff = 0.0;
  for (size_t i = 0; i < a.numel(); ++i) diff += std::abs(a[i] - b[i]);
  EXPECT_GT(diff / a.numel(), 1e-3);
  EXPECT_THROW(model.Infer(ids, nullptr, 8, 1.0), Error);
}

TEST(TacotronTest, SingleSpeakerRejectsEmbedding) {
  Tacotron2 model(Tiny(false), CharVocabulary::Devanagari(), 2);
  const nn::Tensor s({1, 4}, 0.1);
  EXPECT_THROW(model.Infer(model.vocab().Encode("का"), &s, 3, 0.5), Error);
}

TEST(TacotronTest, SaveLoadRoundTrip) {
  const std::string path = testing::MakeTempDir("taco") + "/m.ckpt";
  Tacotron2 model(Tiny(true), CharVocabulary::Devanagari(), 4);
  SaveTacotron(path, model, {{"note", "x"}});
  const LoadedTacotron back = LoadTacotron(path);
  EXPECT_EQ(back.model->config(), model.config());
  EXPECT_EQ(back.model->vocab(), model.vocab());
  EXPECT_EQ(nn::Digest(back.model->params()), nn::Digest(model.params()));
  EXPECT_EQ(back.metadata["note"], "x");
}

TEST(TacotronTest, OverfitsTinyCorpusLoss) {
  // A short run must cut the loss; the long run lives in the acceptance gate.
  const ToolkitConfig cfg = testing::ToyConfig();
  audio::MelExtractor ex(cfg.audio);
  TacotronConfig tc = TacotronConfigFrom(cfg, false);
  Tacotron2 model(tc, CharVocabulary::Devanagari(), 1);
  std::vector<std::vector<int>> ids;
  std::vector<nn::Tensor> mels;
  for (const auto& t : testing::ToySentences(4, 7)) {
    const auto m = ex.Compute(testing::SynthesizeToySpeech(t, cfg.audio.sample_rate));
    ids.push_back(model.vocab().Encode(t));
    mels.push_back(nn::Tensor({m.frames, m.n_mels}, m.data));
  }
  const TextBatch tb = TextBatch::FromSequences(ids);
  const MelBatch mb = MelBatch::FromMels(mels, tc.pad_value);
  std::vector<nn::Var> ps;
  for (const auto& n : model.params().ParameterNames()) ps.push_back(model.params().Get(n));
  nn::AdamOptions ao;
  ao.lr = 2e-3;
  ao.grad_clip = 1.0;
  nn::Adam opt(ps, ao);
  model.SetTraining(true);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 40; ++step) {
    opt.ZeroGrad();
    const LossTerms l = model.Loss(model.Forward(tb, mb), mb);
    nn::Backward(l.total);
    opt.Step();
    if (step == 0) first = l.mel_post_mse.value().item();
    last = l.mel_post_mse.value().item();
  }
  EXPECT_LT(last, 0.5 * first);
}

}  // namespace
}  // namespace comix::spectrogen
