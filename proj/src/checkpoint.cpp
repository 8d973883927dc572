/* Copyright (c) 2026 The uiunet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "uiu/checkpoint.hpp"

#include <fstream>
#include <map>

#include "uiu/tensor_io.hpp"

namespace uiu {

namespace {

constexpr char kMagic[4] = {'U', 'I', 'U', 'C'};

// Meta records ride in the tensor container: text as one byte per element,
// the step counter as four 16-bit limbs, both exact in f32.
Tensor text_tensor(const std::string& s) {
  std::vector<float> bytes;
  bytes.reserve(s.size());
  for (unsigned char c : s) bytes.push_back(static_cast<float>(c));
  const Shape shape{1, 1, 1, static_cast<int64_t>(bytes.size())};
  return Tensor(shape, std::move(bytes));
}

std::string tensor_text(const Tensor& t) {
  std::string s;
  s.reserve(static_cast<size_t>(t.numel()));
  for (float x : t.data()) {
    if (!(x >= 0.0f && x <= 255.0f) || x != static_cast<float>(static_cast<int>(x))) {
      throw FormatError("checkpoint: corrupt text record");
    }
    s.push_back(static_cast<char>(static_cast<unsigned char>(x)));
  }
  return s;
}

Tensor u64_tensor(uint64_t v) {
  std::vector<float> limbs(4);
  for (int i = 0; i < 4; ++i) limbs[static_cast<size_t>(i)] = static_cast<float>((v >> (16 * i)) & 0xFFFF);
  return Tensor({1, 1, 1, 4}, std::move(limbs));
}

uint64_t tensor_u64(const Tensor& t) {
  if (t.numel() != 4) throw FormatError("checkpoint: corrupt step record");
  uint64_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const float x = t.data()[static_cast<size_t>(i)];
    if (!(x >= 0.0f && x <= 65535.0f) || x != static_cast<float>(static_cast<int>(x))) {
      throw FormatError("checkpoint: corrupt step record");
    }
    v |= static_cast<uint64_t>(x) << (16 * i);
  }
  return v;
}

using Records = std::vector<std::pair<std::string, Tensor>>;

Records read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4];
  le::get_bytes(in, magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const uint8_t version = le::get_u8(in);
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t count = le::get_u32(in);
  Records records;
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = le::get_u16(in);
    std::string name(len, '\0');
    le::get_bytes(in, name.data(), len);
    records.emplace_back(std::move(name), read_tensor(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes");
  return records;
}

const Tensor& require(const std::map<std::string, const Tensor*>& index, const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) throw FormatError("checkpoint: missing tensor " + name);
  return *it->second;
}

// Copies every model tensor out of `index` after checking all of them, so a
// failure leaves `model` as it was.
void restore(const std::map<std::string, const Tensor*>& index, ModelParams& model) {
  std::vector<std::pair<Tensor*, const Tensor*>> plan;
  for (auto& e : model.store.entries()) {
    const Tensor& src = require(index, e.name);
    if (src.shape() != e.tensor.shape()) {
      throw FormatError("checkpoint: tensor " + e.name + " has shape " + src.shape().str() + ", model expects " +
                        e.tensor.shape().str());
    }
    plan.emplace_back(&e.tensor, &src);
  }
  for (auto& [dst, src] : plan) std::copy(src->data().begin(), src->data().end(), dst->data().begin());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model, const TrainConfig& train_cfg,
                     const AdamState& adam) {
  Records records;
  records.emplace_back("meta.model_cfg", text_tensor(model.cfg.to_text()));
  records.emplace_back("meta.train_cfg", text_tensor(train_cfg.to_text()));
  records.emplace_back("meta.step", u64_tensor(static_cast<uint64_t>(adam.step)));
  std::vector<const NamedTensor*> weights;
  for (const auto& e : model.store.entries()) {
    records.emplace_back(e.name, e.tensor);
    if (e.kind == ParamKind::weight) weights.push_back(&e);
  }
  if (!adam.m.empty()) {
    if (adam.m.size() != weights.size() || adam.v.size() != weights.size()) {
      throw std::logic_error("save_checkpoint: optimizer state does not match parameters");
    }
    for (size_t i = 0; i < weights.size(); ++i) {
      records.emplace_back("adam.m." + weights[i]->name, Tensor(weights[i]->tensor.shape(), adam.m[i]));
      records.emplace_back("adam.v." + weights[i]->name, Tensor(weights[i]->tensor.shape(), adam.v[i]));
    }
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(kMagic, 4);
    le::put_u8(out, kCheckpointVersion);
    le::put_u32(out, static_cast<uint32_t>(records.size()));
    for (const auto& [name, t] : records) {
      le::put_u16(out, static_cast<uint16_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_tensor(out, t);
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Records records = read_records(path);
  std::map<std::string, const Tensor*> index;
  for (const auto& [name, t] : records) index[name] = &t;

  Checkpoint ck;
  const ModelConfig cfg = ModelConfig::from_kv(KvConfig::parse(tensor_text(require(index, "meta.model_cfg")),
                                                               path.string() + ":meta.model_cfg"));
  ck.train_cfg = TrainConfig::from_kv(
      KvConfig::parse(tensor_text(require(index, "meta.train_cfg")), path.string() + ":meta.train_cfg"));
  ck.step = static_cast<int64_t>(tensor_u64(require(index, "meta.step")));
  Prng rng(0);
  ck.model = build_model(cfg, rng);
  restore(index, ck.model);

  ck.adam.step = ck.step;
  if (index.count("adam.m." + ck.model.store.entries().front().name) != 0) {
    for (const auto& e : ck.model.store.entries()) {
      if (e.kind != ParamKind::weight) continue;
      for (const char* slot : {"adam.m.", "adam.v."}) {
        const Tensor& t = require(index, slot + e.name);
        if (t.shape() != e.tensor.shape()) throw FormatError("checkpoint: tensor " + (slot + e.name) + " has wrong shape");
        auto& dst = slot[5] == 'm' ? ck.adam.m : ck.adam.v;
        dst.emplace_back(t.data().begin(), t.data().end());
      }
    }
  } else if (ck.step != 0) {
    throw FormatError("checkpoint: optimizer state missing for step " + std::to_string(ck.step));
  }
  return ck;
}

void load_checkpoint_into(const std::filesystem::path& path, ModelParams& model) {
  const Records records = read_records(path);
  std::map<std::string, const Tensor*> index;
  for (const auto& [name, t] : records) index[name] = &t;
  restore(index, model);
}

}  // namespace uiu
