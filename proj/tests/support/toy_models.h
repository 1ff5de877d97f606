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

#ifndef COMIX_TESTS_SUPPORT_TOY_MODELS_H_
#define COMIX_TESTS_SUPPORT_TOY_MODELS_H_

#include <string>
#include <vector>

#include "comix/config.h"
#include "comix/nn/tensor.h"
#include "comix/spectrogen.h"

namespace comix::testing {

// Default audio front end with a small encoder/decoder and vocoder so that
// training runs in seconds to minutes on one core.
ToolkitConfig ToyConfig();

// 8 kHz front end with 20 mels for vocoder-only checks.
AudioConfig SmallAudio();
WaveglowConfig SmallWaveglow();

struct GradSample {
  std::string name;
  int index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

// Central-difference check of the full teacher-forced loss (mel MSE pre and
// post plus stop BCE) on a 3-character, 4-frame instance. Samples one element
// from each of `n_params` distinct parameter tensors, skipping elements whose
// gradient is below `min_grad` so the ratio is not noise-dominated.
// `guided_weight` > 0 adds the guided-attention term to the checked loss.
std::vector<GradSample> TacotronGradientCheck(uint64_t seed, int n_params = 10, double min_grad = 1e-6,
                                              double guided_weight = 0.0);

// Fraction of decoder steps whose attention argmax is >= the previous one.
double MonotonicFraction(const nn::Tensor& attention);

}  // namespace comix::testing

#endif  // COMIX_TESTS_SUPPORT_TOY_MODELS_H_
