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

#include "comix/nn/params.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include "comix/error.h"

namespace comix::nn {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'O', 'M', 'I', 'X', 'C', 'K', '1'};

}  // namespace

Var& ParameterStore::AddParameter(const std::string& name, Tensor init) {
  if (index_.count(name)) throw Error("duplicate parameter " + name);
  names_.push_back(name);
  Entry& e = index_[name];
  e.var = Var(std::move(init), true);
  return e.var;
}

Var& ParameterStore::AddBuffer(const std::string& name, Tensor init) {
  if (index_.count(name)) throw Error("duplicate parameter " + name);
  names_.push_back(name);
  Entry& e = index_[name];
  e.var = Var(std::move(init), false);
  e.buffer = true;
  return e.var;
}

Var& ParameterStore::Get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("no parameter named " + name);
  return it->second.var;
}

const Var& ParameterStore::Get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("no parameter named " + name);
  return it->second.var;
}

bool ParameterStore::IsBuffer(const std::string& name) const {
  auto it = index_.find(name);
  return it != index_.end() && it->second.buffer;
}

std::vector<std::string> ParameterStore::ParameterNames() const {
  std::vector<std::string> out;
  for (const auto& n : names_) {
    if (!index_.at(n).buffer) out.push_back(n);
  }
  return out;
}

std::vector<std::string> ParameterStore::NamesWithPrefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& n : names_) {
    if (n.starts_with(prefix)) out.push_back(n);
  }
  return out;
}

void ParameterStore::ZeroGrad() {
  for (auto& [name, e] : index_) e.var.ZeroGrad();
}

bool HasAnyPrefix(std::string_view name, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes) {
    if (name.starts_with(p)) return true;
  }
  return false;
}

std::string Digest(const ParameterStore& store, const std::vector<std::string>& prefixes) {
  uint64_t h = kFnvOffset;
  for (const auto& name : store.names()) {
    if (!prefixes.empty() && !HasAnyPrefix(name, prefixes)) continue;
    const Tensor& t = store.Get(name).value();
    h = Fnv1a64(name, h);
    for (int d : t.shape()) h = Fnv1a64(&d, sizeof(d), h);
    h = Fnv1a64(t.data(), t.numel() * sizeof(double), h);
  }
  return Hex64(h);
}

Tensor XavierUniform(const Shape& shape, int fan_in, int fan_out, Rng& rng) {
  return UniformInit(shape, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

Tensor UniformInit(const Shape& shape, double bound, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.vec()) v = (2.0 * rng.Uniform() - 1.0) * bound;
  return t;
}

const NamedTensor* Checkpoint::Find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void SaveCheckpoint(const std::string& path, const ParameterStore& store, const json& metadata) {
  json header;
  header["metadata"] = metadata;
  header["tensors"] = json::array();
  uint64_t offset = 0;
  for (const auto& name : store.names()) {
    const Tensor& t = store.Get(name).value();
    header["tensors"].push_back({{"name", name},
                                 {"kind", store.IsBuffer(name) ? "buffer" : "param"},
                                 {"shape", t.shape()},
                                 {"offset", offset}});
    offset += t.numel();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& name : store.names()) {
    const Tensor& t = store.Get(name).value();
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw Error("short write on checkpoint " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  char magic[8];
  uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw Error("not a comix checkpoint: " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("truncated checkpoint header: " + path);
  json header = json::parse(text);
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ck;
  ck.metadata = header.value("metadata", json::object());
  for (const auto& e : header.at("tensors")) {
    NamedTensor nt;
    nt.name = e.at("name").get<std::string>();
    nt.buffer = e.at("kind").get<std::string>() == "buffer";
    Shape shape = e.at("shape").get<Shape>();
    uint64_t offset = e.at("offset").get<uint64_t>();
    size_t n = NumElements(shape);
    if ((offset + n) * sizeof(double) > blob.size()) throw Error("truncated checkpoint data: " + path);
    std::vector<double> data(n);
    std::memcpy(data.data(), blob.data() + offset * sizeof(double), n * sizeof(double));
    nt.value = Tensor(std::move(shape), std::move(data));
    ck.tensors.push_back(std::move(nt));
  }
  return ck;
}

void LoadStrict(const Checkpoint& ckpt, ParameterStore* store) {
  for (const auto& name : store->names()) {
    const NamedTensor* t = ckpt.Find(name);
    if (!t) throw Error("checkpoint lacks " + name);
    Var& v = store->Get(name);
    if (t->value.shape() != v.shape()) {
      throw Error("shape mismatch for " + name + ": checkpoint " + ShapeString(t->value.shape()) +
                  ", model " + ShapeString(v.shape()));
    }
    v.mutable_value() = t->value;
  }
}

Adam::Adam(std::vector<Var> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

double Adam::Step() {
  double norm2 = 0.0;
  for (const auto& p : params_) {
    for (double g : p.grad().vec()) norm2 += g * g;
  }
  const double norm = std::sqrt(norm2);
  double scale = 1.0;
  if (opt_.grad_clip > 0 && norm > opt_.grad_clip) scale = opt_.grad_clip / (norm + 1e-6);
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, t_);
  const double bc2 = 1.0 - std::pow(opt_.beta2, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (p.grad().numel() == 0) continue;
    double* w = p.mutable_value().data();
    const double* g = p.grad().data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (size_t j = 0; j < p.value().numel(); ++j) {
      double gj = g[j] * scale + opt_.weight_decay * w[j];
      m[j] = opt_.beta1 * m[j] + (1 - opt_.beta1) * gj;
      v[j] = opt_.beta2 * v[j] + (1 - opt_.beta2) * gj * gj;
      w[j] -= opt_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + opt_.eps);
    }
  }
  return norm;
}

void Adam::ZeroGrad() {
  for (auto& p : params_) p.ZeroGrad();
}

}  // namespace comix::nn
