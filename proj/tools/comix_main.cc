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

// Command-line front end: text normalization, corpus tooling, training,
// synthesis and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "comix/config.h"
#include "comix/corpus.h"
#include "comix/error.h"
#include "comix/evalkit.h"
#include "comix/recipes.h"
#include "comix/speaker.h"
#include "comix/synth.h"
#include "comix/textnorm.h"
#include "comix/vocoder.h"

namespace {

using namespace comix;  // NOLINT
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitError = 1;
constexpr int kExitTruncated = 3;
constexpr int kExitPartial = 4;

void WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string ReadText(const std::string& path) {
  std::stringstream ss;
  if (path.empty() || path == "-") {
    ss << std::cin.rdbuf();
  } else {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    ss << in.rdbuf();
  }
  return ss.str();
}

struct Common {
  std::string config_path;

  ToolkitConfig Config() const {
    ToolkitConfig cfg = ResolveConfig(config_path);
    ValidateConfig(cfg);
    return cfg;
  }
};

void AddConfig(CLI::App* cmd, Common* c) {
  cmd->add_option("--config", c->config_path, "Toolkit config JSON (default: $COMIX_CONFIG or built-in defaults)");
}

int RunTextnorm(const std::string& in, const std::string& out, const std::string& lexicon,
                const std::string& provider_cmd) {
  textnorm::TransliterationProvider provider;
  if (!lexicon.empty()) provider.LoadLexicon(lexicon);
  if (!provider_cmd.empty()) provider.SetExternalCommand(provider_cmd);
  std::istringstream lines(ReadText(in));
  std::string result;
  for (std::string line; std::getline(lines, line);) result += textnorm::Normalize(line, provider).devanagari + "\n";
  WriteText(out, result);
  return 0;
}

int RunTrainVocoder(const ToolkitConfig& cfg, const std::string& manifest_path, const std::string& out, int steps,
                    double lr, uint64_t seed) {
  corpus::CorpusManifest m = corpus::ReadManifest(manifest_path, cfg.audio.sample_rate);
  audio::MelExtractor mel_ex(cfg.audio);
  std::vector<nn::Tensor> mels;
  std::vector<std::vector<double>> clips;
  for (const auto& r : m.records) {
    audio::AudioClip clip = audio::LoadWav(r.audio_path, cfg.audio.sample_rate);
    mels.push_back(recipes::LoadFeatures(r.audio_path, mel_ex, cfg.paths.cache_dir));
    clips.push_back(std::move(clip.samples));
  }
  vocoder::Waveglow model(cfg.waveglow, cfg.audio, seed);
  vocoder::VocoderTrainOptions opt;
  opt.steps = steps;
  opt.lr = lr;
  opt.weight_decay = cfg.train.weight_decay;
  opt.grad_clip = cfg.train.grad_clip;
  opt.seed = seed;
  vocoder::VocoderTrainReport rep = vocoder::TrainWaveglow(&model, mels, clips, opt);
  vocoder::SaveWaveglow(out, model, {{"config", ConfigToJson(cfg)}, {"manifest", manifest_path}, {"steps", steps}});
  std::cout << json({{"checkpoint", out}, {"losses", rep.losses}, {"wall_s", rep.wall_s}}).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"comix: code-mixed Hindi-English text-to-speech toolkit"};
  app.require_subcommand(1);
  Common common;
  int exit_code = 0;

  // textnorm
  auto* tn = app.add_subcommand("textnorm", "Canonicalize and transliterate text to Devanagari, one line at a time");
  AddConfig(tn, &common);
  std::string tn_in = "-", tn_out = "-", tn_lexicon, tn_cmd;
  tn->add_option("--in", tn_in, "Input text file ('-' for stdin)");
  tn->add_option("--out", tn_out, "Output file ('-' for stdout)");
  tn->add_option("--lexicon", tn_lexicon, "Latin<TAB>Devanagari lexicon");
  tn->add_option("--provider-cmd", tn_cmd, "External transliteration command (line protocol)");
  tn->callback([&] {
    common.Config();
    exit_code = RunTextnorm(tn_in, tn_out, tn_lexicon, tn_cmd);
  });

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "Manifest tooling");
  corpus_cmd->require_subcommand(1);
  std::vector<std::string> c_manifests;
  std::string c_out, c_speaker, c_list;
  double c_hours = 0.0, c_val = 0.05;
  uint64_t c_seed = 1234;
  int c_rate = 0;

  auto* pool = corpus_cmd->add_subcommand("pool", "Pool manifests into one");
  AddConfig(pool, &common);
  pool->add_option("--manifest", c_manifests, "Input manifests")->required();
  pool->add_option("--out", c_out, "Output manifest")->required();
  pool->callback([&] {
    std::vector<corpus::CorpusManifest> ms;
    const int rate = common.Config().audio.sample_rate;
    for (const auto& p : c_manifests) ms.push_back(corpus::ReadManifest(p, rate));
    corpus::CorpusManifest pooled = corpus::Pool(ms);
    corpus::WriteManifest(pooled, c_out);
    std::cout << corpus::SummaryToJson(corpus::Summarize(pooled)).dump(1) << "\n";
  });

  auto* subset = corpus_cmd->add_subcommand("subset", "Seeded duration-targeted subset");
  AddConfig(subset, &common);
  subset->add_option("--manifest", c_manifests, "Input manifest")->required()->expected(1);
  subset->add_option("--target-hours", c_hours, "Target duration in hours")->required();
  subset->add_option("--seed", c_seed, "Shuffle seed");
  subset->add_option("--out", c_out, "Output manifest")->required();
  subset->callback([&] {
    corpus::CorpusManifest m = corpus::ReadManifest(c_manifests[0], common.Config().audio.sample_rate);
    corpus::CorpusManifest s = corpus::SubsetByDuration(m, c_hours * 3600.0, c_seed);
    corpus::WriteManifest(s, c_out);
    std::cout << corpus::SummaryToJson(corpus::Summarize(s)).dump(1) << "\n";
  });

  auto* split = corpus_cmd->add_subcommand("split", "Speaker-stratified train/val split");
  AddConfig(split, &common);
  split->add_option("--manifest", c_manifests, "Input manifest")->required()->expected(1);
  split->add_option("--val-fraction", c_val, "Validation fraction in (0, 0.5)");
  split->add_option("--seed", c_seed, "Shuffle seed");
  split->add_option("--out", c_out, "Output manifest")->required();
  split->callback([&] {
    corpus::CorpusManifest m = corpus::ReadManifest(c_manifests[0], common.Config().audio.sample_rate);
    corpus::CorpusManifest s = corpus::SplitManifest(m, c_val, c_seed);
    corpus::WriteManifest(s, c_out);
    std::cout << corpus::SummaryToJson(corpus::Summarize(s)).dump(1) << "\n";
  });

  auto* view = corpus_cmd->add_subcommand("view", "Records of one speaker");
  AddConfig(view, &common);
  view->add_option("--manifest", c_manifests, "Input manifest")->required()->expected(1);
  view->add_option("--speaker", c_speaker, "Speaker id")->required();
  view->add_option("--out", c_out, "Output manifest")->required();
  view->callback([&] {
    corpus::CorpusManifest m = corpus::ReadManifest(c_manifests[0], common.Config().audio.sample_rate);
    corpus::WriteManifest(corpus::SpeakerView(m, c_speaker), c_out);
  });

  auto* stats = corpus_cmd->add_subcommand("stats", "Totals, language fractions and validation");
  AddConfig(stats, &common);
  bool c_check_audio = false;
  stats->add_option("--manifest", c_manifests, "Input manifest")->required()->expected(1);
  stats->add_flag("--check-audio", c_check_audio, "Compare durations with WAV headers");
  stats->callback([&] {
    corpus::CorpusManifest m = corpus::ReadManifest(c_manifests[0], common.Config().audio.sample_rate);
    corpus::ValidateOptions vo;
    vo.require_devanagari = false;
    vo.check_audio = c_check_audio;
    corpus::Validate(m, vo);
    std::cout << corpus::SummaryToJson(corpus::Summarize(m)).dump(1) << "\n";
  });

  auto* build = corpus_cmd->add_subcommand("build", "Manifest from a TSV list id/audio/text/lang/speaker");
  AddConfig(build, &common);
  build->add_option("--list", c_list, "TSV list")->required();
  build->add_option("--rate", c_rate, "Sample rate (default: audio.sample_rate)");
  build->add_option("--out", c_out, "Output manifest")->required();
  build->callback([&] {
    const int rate = c_rate > 0 ? c_rate : common.Config().audio.sample_rate;
    corpus::CorpusManifest m = corpus::BuildFromList(c_list, rate);
    corpus::WriteManifest(m, c_out);
    std::cout << corpus::SummaryToJson(corpus::Summarize(m)).dump(1) << "\n";
  });

  // speaker
  auto* spk = app.add_subcommand("speaker", "Speaker embeddings");
  spk->require_subcommand(1);
  auto* table = spk->add_subcommand("build-table", "Average embedding per speaker");
  AddConfig(table, &common);
  std::string s_manifest, s_extractor = "stub", s_cmd, s_out;
  uint64_t s_seed = 0;
  table->add_option("--manifest", s_manifest, "Input manifest")->required();
  table->add_option("--extractor", s_extractor, "external | stub")->check(CLI::IsMember({"external", "stub"}));
  table->add_option("--extractor-cmd", s_cmd, "Command for the external extractor");
  table->add_option("--seed", s_seed, "Stub extractor seed");
  table->add_option("--out", s_out, "Output table JSON")->required();
  table->callback([&] {
    const ToolkitConfig cfg = common.Config();
    corpus::CorpusManifest m = corpus::ReadManifest(s_manifest, cfg.audio.sample_rate);
    auto ex = speaker::MakeExtractor(s_extractor, s_cmd, s_seed, cfg.speaker.embedding_dim);
    speaker::EmbeddingTable t = speaker::BuildTable(m, *ex);
    t.Save(s_out);
    for (const auto& [id, n] : t.counts) std::cout << id << "\t" << n << "\n";
  });

  // train
  auto* train = app.add_subcommand("train", "Run one spectrogram-predictor recipe");
  AddConfig(train, &common);
  std::string t_recipe;
  train->add_option("--recipe", t_recipe, "Recipe JSON")->required();
  train->callback([&] {
    recipes::TrainReport rep = recipes::RunRecipe(recipes::LoadSpec(t_recipe), common.Config());
    json summary = rep.ToJson();
    summary.erase("losses");
    summary["final_loss"] = rep.losses.empty() ? json(nullptr) : json(rep.losses.back());
    std::cout << summary.dump(1) << "\n";
  });

  auto* tv = app.add_subcommand("train-vocoder", "Train a Waveglow vocoder on a manifest");
  AddConfig(tv, &common);
  std::string v_manifest, v_out;
  int v_steps = 1000;
  double v_lr = 1e-4;
  uint64_t v_seed = 0;
  tv->add_option("--manifest", v_manifest, "Audio manifest")->required();
  tv->add_option("--out", v_out, "Output checkpoint")->required();
  tv->add_option("--steps", v_steps, "Optimizer steps");
  tv->add_option("--lr", v_lr, "Learning rate");
  tv->add_option("--seed", v_seed, "Initialization and crop seed");
  tv->callback([&] { exit_code = RunTrainVocoder(common.Config(), v_manifest, v_out, v_steps, v_lr, v_seed); });

  auto* plan = app.add_subcommand("plan-matrix", "Write the fine-tuning recipe matrix as JSON files");
  AddConfig(plan, &common);
  recipes::MatrixInputs mi;
  std::string p_out;
  std::vector<std::string> p_manifests;
  bool p_pretrain = false;
  plan->add_option("--out", p_out, "Output directory")->required();
  plan->add_option("--manifest", p_manifests, "NAME=PATH for primary, primary_hi, multi, english")->required();
  plan->add_option("--eng-warmstart", mi.eng_warmstart, "English pre-trained checkpoint");
  plan->add_option("--mix-warmstart", mi.mix_warmstart, "Mixed-data pre-trained checkpoint");
  plan->add_option("--speaker-table", mi.speaker_table, "Average-embedding table");
  plan->add_option("--runs", mi.out_root, "Root directory for run outputs");
  plan->add_option("--seed", mi.seed, "Seed for every spec");
  plan->add_flag("--with-pretraining", p_pretrain, "Also emit the two pre-training specs");
  plan->callback([&] {
    common.Config();
    for (const auto& kv : p_manifests) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos) throw Error("--manifest expects NAME=PATH, got '" + kv + "'");
      mi.manifests[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    std::vector<recipes::RecipeSpec> specs = recipes::PlanPaperMatrix(mi);
    if (p_pretrain) {
      auto pre = recipes::PlanPretraining(mi);
      specs.insert(specs.begin(), pre.begin(), pre.end());
    }
    fs::create_directories(p_out);
    for (const auto& s : specs) {
      recipes::SaveSpec(s, p_out + "/" + s.name + ".json");
      std::cout << s.name << "\t" << s.label << "\n";
    }
  });

  // synth
  auto* syn = app.add_subcommand("synth", "Text to WAV with mel and alignment diagnostics");
  AddConfig(syn, &common);
  std::string y_text, y_manifest, y_taco, y_voc, y_out, y_speaker, y_ref, y_extractor_cmd, y_id = "utt";
  synth::SynthOptions y_opts;
  auto* text_opt = syn->add_option("--text", y_text, "Text to synthesize");
  auto* man_opt = syn->add_option("--manifest", y_manifest, "TSV id<TAB>text[<TAB>speaker]");
  text_opt->excludes(man_opt);
  syn->add_option("--id", y_id, "Output basename for --text");
  syn->add_option("--taco", y_taco, "Spectrogram predictor checkpoint")->required();
  syn->add_option("--vocoder", y_voc, "Waveglow checkpoint")->required();
  auto* sid = syn->add_option("--speaker-id", y_speaker, "Speaker id (avg-embed models)");
  auto* ref = syn->add_option("--ref-audio", y_ref, "Reference WAV (audio-embed models)");
  sid->excludes(ref);
  syn->add_option("--extractor-cmd", y_opts.extractor_command, "External speaker extractor command");
  syn->add_option("--sigma", y_opts.sigma, "Vocoder noise scale (default: waveglow.sigma_infer)");
  syn->add_option("--max-steps", y_opts.max_steps, "Decoder step limit (default: decoder.max_steps)");
  syn->add_option("--seed", y_opts.seed, "Noise seed");
  syn->add_option("--out", y_out, "Output directory")->required();
  syn->callback([&] {
    common.Config();
    if (y_text.empty() == y_manifest.empty()) throw CLI::ValidationError("exactly one of --text or --manifest is required");
    synth::Synthesizer s(y_taco, y_voc);
    if (y_manifest.empty()) {
      synth::SynthResult r = s.Synthesize(y_text, {y_speaker, y_ref}, y_opts, y_id);
      synth::WriteOutputs(r, y_out, y_id);
      std::cout << json({{"wav", y_out + "/" + y_id + ".wav"},
                         {"samples", r.clip.samples.size()},
                         {"frames", r.frames},
                         {"duration_s", r.clip.Duration()},
                         {"truncated", r.truncated},
                         {"encoder_text", r.encoder_text}})
                       .dump()
                << "\n";
      if (r.truncated) exit_code = kExitTruncated;
      return;
    }
    std::vector<synth::BatchItem> items = synth::ReadTextManifest(y_manifest);
    for (auto& it : items) {
      if (it.speaker.empty()) it.speaker = {y_speaker, y_ref};
    }
    synth::BatchReport rep = synth::BatchSynthesize(s, items, y_opts, y_out);
    std::cout << json({{"count", rep.entries.size()}, {"failures", rep.failures()}, {"truncated", rep.truncations()}})
                     .dump()
              << "\n";
    if (rep.failures() > 0) {
      exit_code = kExitPartial;
    } else if (rep.truncations() > 0) {
      exit_code = kExitTruncated;
    }
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Listening sessions and MOS/CMOS aggregation");
  ev->require_subcommand(1);
  std::string e_kind = "mos", e_in, e_out;
  std::vector<std::string> e_systems;
  uint64_t e_seed = 0;
  auto* session = ev->add_subcommand("make-session", "Blank rating sheet in seeded random order");
  AddConfig(session, &common);
  session->add_option("--kind", e_kind, "mos | cmos")->check(CLI::IsMember({"mos", "cmos"}));
  session->add_option("--in", e_in, "Test manifest (first column = utterance id)")->required();
  session->add_option("--systems", e_systems, "System ids; for CMOS the first is ours")->required();
  session->add_option("--out", e_out, "Output CSV")->required();
  session->add_option("--seed", e_seed, "Order seed");
  session->callback([&] {
    common.Config();
    evalkit::SessionOptions so{evalkit::ParseKind(e_kind), e_systems, e_seed};
    WriteText(e_out, evalkit::FormatRatings(evalkit::MakeSession(evalkit::ReadUtteranceIds(e_in), so)));
  });
  auto* agg = ev->add_subcommand("aggregate", "Mean +- sample std of a rating file");
  AddConfig(agg, &common);
  agg->add_option("--kind", e_kind, "mos | cmos")->check(CLI::IsMember({"mos", "cmos"}));
  agg->add_option("--in", e_in, "Rating CSV")->required();
  agg->add_option("--out", e_out, "Summary JSON ('-' for stdout)");
  agg->add_option("--seed", e_seed, "Unused; accepted for symmetry with make-session");
  agg->callback([&] {
    common.Config();
    evalkit::EvalSummary s = evalkit::Aggregate(evalkit::ReadRatings(e_in), evalkit::ParseKind(e_kind));
    if (!e_out.empty() && e_out != "-") WriteText(e_out, s.ToJson().dump(1) + "\n");
    std::cout << evalkit::KindName(s.kind) << " " << evalkit::FormatScore(s.overall) << " (n=" << s.overall.n
              << ", rejected=" << s.rejects.size() << ")\n";
    for (const auto& r : s.rejects) std::cerr << "rejected line " << r.line << ": " << r.reason << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "comix: " << e.what() << "\n";
    return kExitError;
  }
  return exit_code;
}
