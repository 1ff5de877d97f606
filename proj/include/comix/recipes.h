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

#ifndef COMIX_RECIPES_H_
#define COMIX_RECIPES_H_

#include <map>
#include <string>
#include <vector>

#include "comix/audio.h"
#include "comix/config.h"
#include "comix/nn/params.h"
#include "comix/speaker.h"
#include "json.hpp"

namespace comix::recipes {

enum class Stage { kEngPretrain, kMixPretrain, kFinetune };

const char* StageName(Stage s);
Stage ParseStage(const std::string& s);

struct RecipeSpec {
  std::string name;
  Stage stage = Stage::kFinetune;
  // Checkpoint path; required for FINETUNE.
  std::string init_from;
  std::vector<std::string> freeze;
  std::vector<std::string> drop_on_load;
  std::string manifest;
  // Optional manifest narrowing applied before the train/val split.
  std::string lang_filter;
  std::string speaker_filter;
  // Seeded duration subset in seconds; 0 keeps everything.
  double subset_s = 0.0;
  // Fraction split off for validation when the manifest has no VAL records;
  // negative selects the train config value, 0 disables validation.
  double val_fraction = -1.0;
  speaker::Policy speaker_policy = speaker::Policy::kNone;
  std::string speaker_table;
  std::string extractor = "stub";
  std::string extractor_command;
  std::string lexicon;
  // 0 selects the stage default from the train config.
  double lr = 0.0;
  // 0 batches by total mel frames (train.batch_frames).
  int batch_size = 0;
  int max_steps = 1000;
  int checkpoint_every = 0;
  int eval_every = 0;
  uint64_t seed = 1234;
  std::string out_dir;
  // Free-form note tying the spec to a results-table cell.
  std::string label;

  bool operator==(const RecipeSpec&) const = default;
};

nlohmann::json SpecToJson(const RecipeSpec& s);
// Strict: unknown keys raise.
RecipeSpec SpecFromJson(const nlohmann::json& j);
RecipeSpec LoadSpec(const std::string& path);
void SaveSpec(const RecipeSpec& s, const std::string& path);
void ValidateSpec(const RecipeSpec& s);

struct SurgeryReport {
  std::vector<std::string> copied;
  // Checkpoint entries discarded because of drop_on_load.
  std::vector<std::string> dropped;
  // Target entries left at their fresh initialization.
  std::vector<std::string> fresh;

  nlohmann::json ToJson() const;
};

// Copies checkpoint entries into `target` by name. Entries under a
// drop_on_load prefix keep their fresh values; other shape mismatches raise
// naming the parameter. Every drop prefix must match a checkpoint entry.
SurgeryReport SurgeryLoad(const nn::Checkpoint& ckpt, nn::ParameterStore* target,
                          const std::vector<std::string>& drop_on_load);

struct TrainReport {
  std::string name;
  std::vector<double> losses;
  std::vector<std::pair<int, double>> val_losses;
  double wall_s = 0.0;
  std::vector<std::string> checkpoints;
  std::string frozen_digest_before;
  std::string frozen_digest_after;
  SurgeryReport surgery;
  int steps_run = 0;
  bool stopped_early = false;

  nlohmann::json ToJson() const;
};

// Trains one recipe; writes checkpoints, config.json and report.json under
// spec.out_dir.
TrainReport RunRecipe(const RecipeSpec& spec, const ToolkitConfig& cfg);

// Log-mel features [frames, n_mels] of a WAV, optionally memoized under
// cache_dir keyed by the audio config and path.
nn::Tensor LoadFeatures(const std::string& wav_path, const audio::MelExtractor& extractor,
                        const std::string& cache_dir);

// Names of the manifests plan_paper_matrix expects.
inline constexpr const char* kPrimaryManifest = "primary";
inline constexpr const char* kPrimaryHindiManifest = "primary_hi";
inline constexpr const char* kMultiManifest = "multi";
inline constexpr const char* kEnglishManifest = "english";

struct MatrixInputs {
  std::map<std::string, std::string> manifests;
  std::string eng_warmstart;
  std::string mix_warmstart;
  std::string speaker_table;
  std::string out_root = "runs";
  uint64_t seed = 1234;
};

// Fine-tuning specs for the 4 x 2 MOS/CMOS grid followed by the 4
// low-resource adaptation rows. Purely declarative.
std::vector<RecipeSpec> PlanPaperMatrix(const MatrixInputs& in);
// The two pre-training stages the matrix starts from.
std::vector<RecipeSpec> PlanPretraining(const MatrixInputs& in);

}  // namespace comix::recipes

#endif  // COMIX_RECIPES_H_
