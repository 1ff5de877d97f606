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

#ifndef COMIX_UTIL_RNG_H_
#define COMIX_UTIL_RNG_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace comix {

// Seeded generator whose derived draws (bounded integers, uniforms, normals)
// do not depend on the standard library's distribution implementations, so a
// seed produces the same stream on every toolchain.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm =
      "mt19937_64+lemire-rejection+box-muller";

  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform integer in [0, n).
  uint64_t Below(uint64_t n);

  // Uniform real in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }

  double Normal();

  template <class T>
  void Shuffle(std::vector<T>* items) {
    for (size_t i = items->size(); i > 1; --i) {
      size_t j = static_cast<size_t>(Below(i));
      std::swap((*items)[i - 1], (*items)[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

uint64_t Fnv1a64(std::string_view bytes, uint64_t h = kFnvOffset);
uint64_t Fnv1a64(const void* data, size_t size, uint64_t h = kFnvOffset);
std::string Hex64(uint64_t v);

// Derives a stream seed from a textual key, e.g. an utterance id.
uint64_t SeedFromKey(std::string_view key, uint64_t seed);

}  // namespace comix

#endif  // COMIX_UTIL_RNG_H_
