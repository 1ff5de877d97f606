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

#include "comix/recipes.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "comix/corpus.h"
#include "comix/error.h"
#include "comix/spectrogen.h"
#include "comix/textnorm.h"

namespace comix::recipes {

using nlohmann::json;
namespace fs = std::filesystem;

const char* StageName(Stage s) {
  switch (s) {
    case Stage::kEngPretrain:
      return "ENG_PRETRAIN";
    case Stage::kMixPretrain:
      return "MIX_PRETRAIN";
    case Stage::kFinetune:
      return "FINETUNE";
  }
  return "?";
}

Stage ParseStage(const std::string& s) {
  if (s == "ENG_PRETRAIN") return Stage::kEngPretrain;
  if (s == "MIX_PRETRAIN") return Stage::kMixPretrain;
  if (s == "FINETUNE") return Stage::kFinetune;
  throw Error("unknown recipe stage '" + s + "'");
}

json SpecToJson(const RecipeSpec& s) {
  return {{"name", s.name},
          {"stage", StageName(s.stage)},
          {"init_from", s.init_from},
          {"freeze", s.freeze},
          {"drop_on_load", s.drop_on_load},
          {"manifest", s.manifest},
          {"lang_filter", s.lang_filter},
          {"speaker_filter", s.speaker_filter},
          {"subset_s", s.subset_s},
          {"val_fraction", s.val_fraction},
          {"speaker_policy", speaker::PolicyName(s.speaker_policy)},
          {"speaker_table", s.speaker_table},
          {"extractor", s.extractor},
          {"extractor_command", s.extractor_command},
          {"lexicon", s.lexicon},
          {"lr", s.lr},
          {"batch_size", s.batch_size},
          {"max_steps", s.max_steps},
          {"checkpoint_every", s.checkpoint_every},
          {"eval_every", s.eval_every},
          {"seed", s.seed},
          {"out_dir", s.out_dir},
          {"label", s.label}};
}

RecipeSpec SpecFromJson(const json& j) {
  if (!j.is_object()) throw Error("recipe: expected a JSON object");
  static const std::set<std::string> kKeys = {
      "name", "stage", "init_from", "freeze", "drop_on_load", "manifest", "lang_filter", "speaker_filter",
      "subset_s", "val_fraction", "speaker_policy", "speaker_table", "extractor", "extractor_command", "lexicon",
      "lr", "batch_size", "max_steps", "checkpoint_every", "eval_every", "seed", "out_dir", "label"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKeys.count(it.key())) throw Error("recipe: unknown key '" + it.key() + "'");
  }
  RecipeSpec s;
  auto get = [&](const char* key, auto* out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
      *out = it->template get<std::remove_pointer_t<decltype(out)>>();
    } catch (const json::exception&) {
      throw Error(std::string("recipe: wrong type for '") + key + "'");
    }
  };
  std::string stage = StageName(s.stage);
  std::string policy = speaker::PolicyName(s.speaker_policy);
  get("name", &s.name);
  get("stage", &stage);
  get("init_from", &s.init_from);
  get("freeze", &s.freeze);
  get("drop_on_load", &s.drop_on_load);
  get("manifest", &s.manifest);
  get("lang_filter", &s.lang_filter);
  get("speaker_filter", &s.speaker_filter);
  get("subset_s", &s.subset_s);
  get("val_fraction", &s.val_fraction);
  get("speaker_policy", &policy);
  get("speaker_table", &s.speaker_table);
  get("extractor", &s.extractor);
  get("extractor_command", &s.extractor_command);
  get("lexicon", &s.lexicon);
  get("lr", &s.lr);
  get("batch_size", &s.batch_size);
  get("max_steps", &s.max_steps);
  get("checkpoint_every", &s.checkpoint_every);
  get("eval_every", &s.eval_every);
  get("seed", &s.seed);
  get("out_dir", &s.out_dir);
  get("label", &s.label);
  s.stage = ParseStage(stage);
  s.speaker_policy = speaker::ParsePolicy(policy);
  return s;
}

RecipeSpec LoadSpec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read recipe " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("recipe " + path + ": " + e.what());
  }
  return SpecFromJson(j);
}

void SaveSpec(const RecipeSpec& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write recipe " + path);
  out << SpecToJson(s).dump(2) << "\n";
}

void ValidateSpec(const RecipeSpec& s) {
  if (s.stage == Stage::kFinetune && s.init_from.empty()) throw Error("recipe " + s.name + ": FINETUNE requires init_from");
  if (s.manifest.empty()) throw Error("recipe " + s.name + ": manifest is required");
  if (s.batch_size < 0 || s.max_steps < 0) throw Error("recipe " + s.name + ": bad batch_size or max_steps");
  if (s.stage == Stage::kEngPretrain && s.speaker_policy != speaker::Policy::kNone) {
    throw Error("recipe " + s.name + ": English pre-training is single-speaker");
  }
  if (s.val_fraction >= 0.5) throw Error("recipe " + s.name + ": val_fraction must be below 0.5");
}

json SurgeryReport::ToJson() const { return {{"copied", copied}, {"dropped", dropped}, {"fresh", fresh}}; }

SurgeryReport SurgeryLoad(const nn::Checkpoint& ckpt, nn::ParameterStore* target,
                          const std::vector<std::string>& drop_on_load) {
  for (const auto& p : drop_on_load) {
    bool hit = false;
    for (const auto& t : ckpt.tensors) hit = hit || t.name.starts_with(p);
    if (!hit) throw Error("drop prefix '" + p + "' matches no checkpoint parameter");
  }
  SurgeryReport report;
  for (const auto& t : ckpt.tensors) {
    if (nn::HasAnyPrefix(t.name, drop_on_load)) report.dropped.push_back(t.name);
  }
  for (const auto& name : target->names()) {
    const nn::NamedTensor* src = ckpt.Find(name);
    if (nn::HasAnyPrefix(name, drop_on_load) || !src) {
      report.fresh.push_back(name);
      continue;
    }
    nn::Var& v = target->Get(name);
    if (src->value.shape() != v.shape()) {
      throw Error("shape mismatch for " + name + ": checkpoint " + nn::ShapeString(src->value.shape()) +
                  ", model " + nn::ShapeString(v.shape()));
    }
    v.mutable_value() = src->value;
    report.copied.push_back(name);
  }
  return report;
}

json TrainReport::ToJson() const {
  json val = json::array();
  for (const auto& [step, loss] : val_losses) val.push_back({{"step", step}, {"loss", loss}});
  return {{"name", name},
          {"losses", losses},
          {"val_losses", val},
          {"wall_s", wall_s},
          {"checkpoints", checkpoints},
          {"frozen_digest_before", frozen_digest_before},
          {"frozen_digest_after", frozen_digest_after},
          {"surgery", surgery.ToJson()},
          {"steps_run", steps_run},
          {"stopped_early", stopped_early}};
}

nn::Tensor LoadFeatures(const std::string& wav_path, const audio::MelExtractor& extractor,
                        const std::string& cache_dir) {
  const AudioConfig& ac = extractor.config();
  std::string cache_path;
  if (!cache_dir.empty()) {
    const uint64_t key = Fnv1a64(wav_path, Fnv1a64(AudioToJson(ac).dump()));
    cache_path = cache_dir + "/" + Hex64(key) + ".feat";
    if (fs::exists(cache_path)) {
      int rows = 0, cols = 0;
      std::vector<double> data = audio::ReadFeatureFile(cache_path, &rows, &cols);
      return nn::Tensor({rows, cols}, std::move(data));
    }
  }
  audio::AudioClip clip = audio::LoadWav(wav_path, ac.sample_rate);
  if (ac.trim_silence) clip = audio::TrimSilence(clip, ac.trim_db, ac.WinLength(), ac.HopLength());
  audio::MelSpectrogram mel = extractor.Compute(clip);
  // Same precision as a cache hit.
  for (double& v : mel.data) v = static_cast<float>(v);
  if (!cache_path.empty()) {
    fs::create_directories(cache_dir);
    audio::WriteFeatureFile(cache_path, mel.frames, mel.n_mels, mel.data);
  }
  return nn::Tensor({mel.frames, mel.n_mels}, std::move(mel.data));
}

namespace {

struct Item {
  std::vector<int> ids;
  nn::Tensor mel;
  std::vector<double> speaker;
};

std::vector<Item> PrepareItems(const corpus::CorpusManifest& m, const spectrogen::CharVocabulary& vocab,
                               const textnorm::TransliterationProvider& provider, const audio::MelExtractor& mel_ex,
                               const std::string& cache_dir, speaker::Policy policy, const speaker::EmbeddingTable& table,
                               const speaker::Extractor* extractor) {
  std::vector<Item> items;
  for (const auto& r : m.records) {
    Item it;
    const std::string text = vocab.name() == "roman" ? textnorm::Canonicalize(r.text)
                                                     : textnorm::Normalize(r.text, provider).devanagari;
    it.ids = vocab.Encode(text);
    it.mel = LoadFeatures(r.audio_path, mel_ex, cache_dir);
    if (policy != speaker::Policy::kNone) {
      it.speaker = speaker::Lookup(policy, r, table, extractor, m.sample_rate_hz).vector;
    }
    items.push_back(std::move(it));
  }
  return items;
}

struct Batch {
  spectrogen::TextBatch text;
  spectrogen::MelBatch mels;
  nn::Tensor speaker;
  bool has_speaker = false;
};

Batch MakeBatch(const std::vector<Item>& items, const std::vector<size_t>& idx, double pad_value) {
  std::vector<std::vector<int>> seqs;
  std::vector<nn::Tensor> mels;
  Batch b;
  for (size_t i : idx) {
    seqs.push_back(items[i].ids);
    mels.push_back(items[i].mel);
  }
  b.text = spectrogen::TextBatch::FromSequences(seqs);
  b.mels = spectrogen::MelBatch::FromMels(mels, pad_value);
  if (!items[idx[0]].speaker.empty()) {
    const int S = static_cast<int>(items[idx[0]].speaker.size());
    b.speaker = nn::Tensor({static_cast<int>(idx.size()), S});
    for (size_t k = 0; k < idx.size(); ++k) {
      std::copy(items[idx[k]].speaker.begin(), items[idx[k]].speaker.end(), b.speaker.data() + k * S);
    }
    b.has_speaker = true;
  }
  return b;
}

}  // namespace

TrainReport RunRecipe(const RecipeSpec& spec, const ToolkitConfig& cfg) {
  ValidateSpec(spec);
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  report.name = spec.name;
  const std::string out_dir = spec.out_dir.empty() ? cfg.paths.work_dir + "/" + spec.name : spec.out_dir;
  fs::create_directories(out_dir);
  SaveConfig(cfg, out_dir + "/config.json");

  corpus::CorpusManifest m = corpus::ReadManifest(spec.manifest, cfg.audio.sample_rate);
  if (m.sample_rate_hz != cfg.audio.sample_rate) {
    throw Error("manifest rate " + std::to_string(m.sample_rate_hz) + " Hz differs from audio.sample_rate");
  }
  if (!spec.lang_filter.empty()) m = corpus::FilterLang(m, corpus::ParseLang(spec.lang_filter));
  if (!spec.speaker_filter.empty()) m = corpus::SpeakerView(m, spec.speaker_filter);
  if (spec.subset_s > 0) m = corpus::SubsetByDuration(m, spec.subset_s, spec.seed);
  if (m.records.empty()) throw Error("recipe " + spec.name + ": manifest selection is empty");
  const double val_fraction = spec.val_fraction < 0 ? cfg.train.val_fraction : spec.val_fraction;
  bool has_val = false;
  for (const auto& r : m.records) has_val = has_val || r.split == corpus::Split::kVal;
  if (!has_val && val_fraction > 0 && m.records.size() >= 2) m = corpus::SplitManifest(m, val_fraction, spec.seed);
  corpus::CorpusManifest train = corpus::FilterSplit(m, corpus::Split::kTrain);
  corpus::CorpusManifest val = corpus::FilterSplit(m, corpus::Split::kVal);
  if (val_fraction == 0) {
    train = m;
    val.records.clear();
  }
  corpus::ValidateOptions vopt;
  vopt.require_devanagari = false;
  corpus::Validate(train, vopt);

  const bool roman = spec.stage == Stage::kEngPretrain;
  spectrogen::CharVocabulary vocab = roman ? spectrogen::CharVocabulary::Roman() : spectrogen::CharVocabulary::Devanagari();
  textnorm::TransliterationProvider provider;
  if (!spec.lexicon.empty()) provider.LoadLexicon(spec.lexicon);

  const bool multi = spec.speaker_policy != speaker::Policy::kNone;
  std::unique_ptr<speaker::Extractor> extractor;
  speaker::EmbeddingTable table;
  if (multi) {
    extractor = speaker::MakeExtractor(spec.extractor, spec.extractor_command, 0, cfg.speaker.embedding_dim);
    if (spec.speaker_policy == speaker::Policy::kAvgEmbed) {
      table = spec.speaker_table.empty() ? speaker::BuildTable(train, *extractor)
                                         : speaker::EmbeddingTable::Load(spec.speaker_table);
    }
  }

  audio::MelExtractor mel_ex(cfg.audio);
  std::vector<Item> train_items = PrepareItems(train, vocab, provider, mel_ex, cfg.paths.cache_dir, spec.speaker_policy,
                                               table, extractor.get());
  std::vector<Item> val_items = PrepareItems(val, vocab, provider, mel_ex, cfg.paths.cache_dir, spec.speaker_policy,
                                             table, extractor.get());

  spectrogen::TacotronConfig tc = spectrogen::TacotronConfigFrom(cfg, multi);
  spectrogen::Tacotron2 model(tc, vocab, spec.seed);
  json parent = nullptr;
  if (!spec.init_from.empty()) {
    nn::Checkpoint ck = nn::LoadCheckpoint(spec.init_from);
    if (ck.metadata.contains("audio") && ck.metadata["audio"] != AudioToJson(cfg.audio)) {
      throw Error("audio config of " + spec.init_from + " differs from the current audio config");
    }
    report.surgery = SurgeryLoad(ck, &model.params(), spec.drop_on_load);
    parent = ck.metadata.value("recipe", json(nullptr));
  } else {
    report.surgery.fresh = model.params().names();
  }

  for (const auto& p : spec.freeze) {
    if (model.params().NamesWithPrefix(p).empty()) throw Error("freeze prefix '" + p + "' matches no parameter");
  }
  model.SetFrozenPrefixes(spec.freeze);
  std::vector<nn::Var> trainable;
  for (const auto& n : model.params().ParameterNames()) {
    if (!nn::HasAnyPrefix(n, spec.freeze)) trainable.push_back(model.params().Get(n));
  }
  report.frozen_digest_before = spec.freeze.empty() ? "" : nn::Digest(model.params(), spec.freeze);

  nn::AdamOptions ao;
  ao.lr = spec.lr > 0 ? spec.lr : (spec.stage == Stage::kFinetune ? cfg.train.lr_finetune : cfg.train.lr_pretrain);
  ao.beta1 = cfg.train.adam_beta1;
  ao.beta2 = cfg.train.adam_beta2;
  ao.eps = cfg.train.adam_eps;
  ao.weight_decay = cfg.train.weight_decay;
  ao.grad_clip = cfg.train.grad_clip;
  nn::Adam adam(trainable, ao);

  json speaker_meta = {{"policy", speaker::PolicyName(spec.speaker_policy)}};
  if (extractor) speaker_meta["extractor"] = extractor->Version();
  if (spec.speaker_policy == speaker::Policy::kAvgEmbed) speaker_meta["table"] = table.ToJson();
  auto save = [&](const std::string& path, int step) {
    json meta = {{"audio", AudioToJson(cfg.audio)},
                 {"config", ConfigToJson(cfg)},
                 {"speaker", speaker_meta},
                 {"recipe", {{"spec", SpecToJson(spec)}, {"step", step}, {"init_from", spec.init_from}, {"parent", parent}}}};
    spectrogen::SaveTacotron(path, model, meta);
    report.checkpoints.push_back(path);
  };

  const int checkpoint_every = spec.checkpoint_every > 0 ? spec.checkpoint_every : cfg.train.checkpoint_every;
  const int eval_every = spec.eval_every > 0 ? spec.eval_every : cfg.train.eval_every;
  Rng order_rng(spec.seed);
  model.Reseed(spec.seed ^ 0xd509ULL);
  std::vector<size_t> order(train_items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  size_t cursor = order.size();
  // Next batch from the shuffled order: a fixed count, or items until the
  // frame budget would be exceeded (always at least one). Batches never
  // straddle a reshuffle.
  auto next_batch = [&]() {
    const size_t n = spec.batch_size > 0 ? std::min<size_t>(spec.batch_size, order.size()) : 1;
    if (cursor + n > order.size()) {
      order_rng.Shuffle(&order);
      cursor = 0;
    }
    std::vector<size_t> idx(order.begin() + cursor, order.begin() + cursor + n);
    cursor += n;
    if (spec.batch_size == 0) {
      int frames = train_items[idx[0]].mel.dim(0);
      while (cursor < order.size() && frames + train_items[order[cursor]].mel.dim(0) <= cfg.train.batch_frames) {
        frames += train_items[order[cursor]].mel.dim(0);
        idx.push_back(order[cursor++]);
      }
    }
    return idx;
  };
  double best_val = std::numeric_limits<double>::infinity();
  int bad_evals = 0;
  for (int step = 0; step < spec.max_steps; ++step) {
    const std::vector<size_t> idx = next_batch();
    Batch b = MakeBatch(train_items, idx, tc.pad_value);
    model.SetTraining(true);
    spectrogen::SpectrogenOutput out = model.Forward(b.text, b.mels, b.has_speaker ? &b.speaker : nullptr);
    spectrogen::LossTerms loss = model.Loss(out, b.mels);
    adam.ZeroGrad();
    nn::Backward(loss.total);
    adam.Step();
    report.losses.push_back(loss.total.value().item());
    report.steps_run = step + 1;

    if (!val_items.empty() && eval_every > 0 && (step + 1) % eval_every == 0) {
      nn::NoGradGuard no_grad;
      model.SetTraining(false);
      double total = 0.0;
      for (size_t i = 0; i < val_items.size(); ++i) {
        Batch vb = MakeBatch(val_items, {i}, tc.pad_value);
        auto vo = model.Forward(vb.text, vb.mels, vb.has_speaker ? &vb.speaker : nullptr);
        total += model.Loss(vo, vb.mels).total.value().item();
      }
      const double v = total / static_cast<double>(val_items.size());
      report.val_losses.push_back({step + 1, v});
      if (v < best_val) {
        best_val = v;
        bad_evals = 0;
      } else if (++bad_evals >= cfg.train.patience) {
        report.stopped_early = true;
      }
    }
    if (checkpoint_every > 0 && (step + 1) % checkpoint_every == 0) {
      save(out_dir + "/step" + std::to_string(step + 1) + ".ckpt", step + 1);
    }
    if (report.stopped_early) break;
  }
  model.SetTraining(false);
  save(out_dir + "/final.ckpt", report.steps_run);
  report.frozen_digest_after = spec.freeze.empty() ? "" : nn::Digest(model.params(), spec.freeze);
  report.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream(out_dir + "/report.json") << report.ToJson().dump(1) << "\n";
  return report;
}

namespace {

const std::string& RequireManifest(const MatrixInputs& in, const std::string& key) {
  auto it = in.manifests.find(key);
  if (it == in.manifests.end() || it->second.empty()) throw Error("missing manifest '" + key + "'");
  return it->second;
}

}  // namespace

std::vector<RecipeSpec> PlanPretraining(const MatrixInputs& in) {
  RecipeSpec eng;
  eng.name = "eng_pretrain";
  eng.stage = Stage::kEngPretrain;
  eng.manifest = RequireManifest(in, kEnglishManifest);
  eng.seed = in.seed;
  eng.out_dir = in.out_root + "/" + eng.name;
  eng.label = "English warmstart: Roman-script English pre-training";

  RecipeSpec mix;
  mix.name = "mix_pretrain";
  mix.stage = Stage::kMixPretrain;
  mix.init_from = eng.out_dir + "/final.ckpt";
  mix.drop_on_load = {"encoder.embedding"};
  mix.manifest = RequireManifest(in, kMultiManifest);
  mix.seed = in.seed;
  mix.out_dir = in.out_root + "/" + mix.name;
  mix.label = "Mix-data warmstart: single-speaker topology on pooled Devanagari data";
  return {eng, mix};
}

std::vector<RecipeSpec> PlanPaperMatrix(const MatrixInputs& in) {
  const std::string& primary = RequireManifest(in, kPrimaryManifest);
  const std::string& primary_hi = RequireManifest(in, kPrimaryHindiManifest);
  const std::string& multi = RequireManifest(in, kMultiManifest);
  const std::string eng = in.eng_warmstart.empty() ? in.out_root + "/eng_pretrain/final.ckpt" : in.eng_warmstart;
  const std::string mix = in.mix_warmstart.empty() ? in.out_root + "/mix_pretrain/final.ckpt" : in.mix_warmstart;

  struct Row {
    const char* key;
    const char* label;
    const std::string* manifest;
    speaker::Policy policy;
  };
  const Row rows[] = {
      {"single_hi", "single speaker (Hindi only)", &primary_hi, speaker::Policy::kNone},
      {"single_hien", "single speaker (Hindi + English)", &primary, speaker::Policy::kNone},
      {"multi_audio", "multi-speaker (audio-embed, Hindi + English)", &multi, speaker::Policy::kAudioEmbed},
      {"multi_avg", "multi-speaker (avg-embed, Hindi + English)", &multi, speaker::Policy::kAvgEmbed},
  };

  auto base = [&](const std::string& name, bool eng_warm) {
    RecipeSpec s;
    s.name = name;
    s.stage = Stage::kFinetune;
    s.init_from = eng_warm ? eng : mix;
    if (eng_warm) s.drop_on_load = {"encoder.embedding"};
    s.seed = in.seed;
    s.out_dir = in.out_root + "/" + name;
    return s;
  };

  std::vector<RecipeSpec> out;
  for (const Row& r : rows) {
    for (int col = 0; col < 2; ++col) {
      const bool eng_warm = col == 0;
      RecipeSpec s = base(std::string(r.key) + (eng_warm ? "_eng_warmstart" : "_mix_warmstart"), eng_warm);
      s.manifest = *r.manifest;
      s.speaker_policy = r.policy;
      if (r.manifest == &primary_hi) s.lang_filter = "hi";
      if (r.policy == speaker::Policy::kAvgEmbed) s.speaker_table = in.speaker_table;
      if (!eng_warm) {
        s.freeze = {"encoder."};
        if (r.policy != speaker::Policy::kNone) s.freeze.push_back("speaker.");
      }
      s.label = std::string("MOS/CMOS grid: ") + r.label + " x " +
                (eng_warm ? "eng-warmstart (full train)" : "mix-warmstart (decoder only train)");
      out.push_back(std::move(s));
    }
  }

  constexpr double kThreeHours = 3 * 3600.0;
  struct Adapt {
    const char* name;
    const char* label;
    bool eng_warm;
    bool frozen;
    double subset_s;
  };
  const Adapt adapts[] = {
      {"adapt_eng_warmstart_3h", "eng-warmstart + Target (3 hrs)", true, false, kThreeHours},
      {"adapt_mix_warmstart_3h", "mix-warmstart + Target (3 hrs)", false, false, kThreeHours},
      {"adapt_mix_warmstart_frozen_3h", "mix-warmstart + Target (frozen encoder, 3 hrs)", false, true, kThreeHours},
      {"adapt_mix_warmstart_frozen_15h", "mix-warmstart + Target (frozen encoder, 15 hrs)", false, true, 0.0},
  };
  for (const Adapt& a : adapts) {
    RecipeSpec s = base(a.name, a.eng_warm);
    s.manifest = primary;
    s.subset_s = a.subset_s;
    if (a.frozen) s.freeze = {"encoder."};
    s.label = std::string("low-resource adaptation: ") + a.label;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace comix::recipes
