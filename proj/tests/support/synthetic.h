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

#ifndef COMIX_TESTS_SUPPORT_SYNTHETIC_H_
#define COMIX_TESTS_SUPPORT_SYNTHETIC_H_

#include <string>
#include <vector>

#include "comix/audio.h"
#include "comix/corpus.h"

namespace comix::testing {

// Toy "speech": every character becomes a short two-partial tone whose
// pitch depends on the code point; spaces are short pauses.
audio::AudioClip SynthesizeToySpeech(const std::string& text, int sample_rate, double pitch_shift = 1.0,
                                     double char_s = 0.06);

// Short Devanagari sentences built from a small syllable inventory.
std::vector<std::string> ToySentences(int n, uint64_t seed, int min_words = 2, int max_words = 3);

// Writes WAVs under `dir` and returns a manifest over them.
corpus::CorpusManifest WriteToyCorpus(const std::string& dir, const std::vector<std::string>& texts,
                                      const std::string& speaker, int sample_rate,
                                      corpus::Lang lang = corpus::Lang::kHi, double pitch_shift = 1.0);

// Fresh directory under the system temp dir.
std::string MakeTempDir(const std::string& tag);

}  // namespace comix::testing

#endif  // COMIX_TESTS_SUPPORT_SYNTHETIC_H_
