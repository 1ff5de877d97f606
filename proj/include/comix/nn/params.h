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

#ifndef COMIX_NN_PARAMS_H_
#define COMIX_NN_PARAMS_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "comix/nn/autograd.h"
#include "comix/util/rng.h"
#include "json.hpp"

namespace comix::nn {

// Named parameters (trainable) and buffers (running statistics) of a model,
// kept in registration order.
class ParameterStore {
 public:
  Var& AddParameter(const std::string& name, Tensor init);
  Var& AddBuffer(const std::string& name, Tensor init);

  bool Has(const std::string& name) const { return index_.count(name) > 0; }
  Var& Get(const std::string& name);
  const Var& Get(const std::string& name) const;
  bool IsBuffer(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::vector<std::string> ParameterNames() const;
  std::vector<std::string> NamesWithPrefix(std::string_view prefix) const;

  void ZeroGrad();

 private:
  struct Entry {
    Var var;
    bool buffer = false;
  };
  std::vector<std::string> names_;
  std::map<std::string, Entry> index_;
};

bool HasAnyPrefix(std::string_view name, const std::vector<std::string>& prefixes);

// FNV-1a digest over name, shape and raw bytes of every entry whose name
// starts with one of `prefixes` (all entries when empty).
std::string Digest(const ParameterStore& store, const std::vector<std::string>& prefixes = {});

Tensor XavierUniform(const Shape& shape, int fan_in, int fan_out, Rng& rng);
Tensor UniformInit(const Shape& shape, double bound, Rng& rng);

// ---- checkpoints -----------------------------------------------------------
// Layout: "COMIXCK1", u64 header length, JSON header
// {metadata, tensors: [{name, kind, shape, offset}]}, float64 little-endian blob.
struct NamedTensor {
  std::string name;
  bool buffer = false;
  Tensor value;
};

struct Checkpoint {
  nlohmann::json metadata;
  std::vector<NamedTensor> tensors;

  const NamedTensor* Find(const std::string& name) const;
};

void SaveCheckpoint(const std::string& path, const ParameterStore& store,
                    const nlohmann::json& metadata);
Checkpoint LoadCheckpoint(const std::string& path);

// Copies every store entry from the checkpoint; missing names or shape
// mismatches raise.
void LoadStrict(const Checkpoint& ckpt, ParameterStore* store);

// ---- optimizer ---------------------------------------------------------------
struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Global gradient-norm clip; <= 0 disables.
  double grad_clip = 0.0;
};

class Adam {
 public:
  Adam(std::vector<Var> params, AdamOptions options);

  // Returns the pre-clip global gradient norm.
  double Step();
  void ZeroGrad();
  int steps() const { return t_; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamOptions opt_;
  int t_ = 0;
};

}  // namespace comix::nn

#endif  // COMIX_NN_PARAMS_H_
