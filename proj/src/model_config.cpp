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

#include <algorithm>
#include <sstream>

#include "uiu/model.hpp"

namespace uiu {

namespace {

constexpr StageSpec pool(int depth, int64_t mid, int64_t out) { return {RsuMode::pooling, depth, mid, out}; }
constexpr StageSpec dil(int depth, int64_t mid, int64_t out) { return {RsuMode::dilated, depth, mid, out}; }

std::string stage_text(const StageSpec& s) {
  std::ostringstream os;
  os << (s.mode == RsuMode::pooling ? 'p' : 'd') << s.depth << ':' << s.mid_ch << ':' << s.out_ch;
  return os.str();
}

StageSpec parse_stage(const std::string& text) {
  StageSpec s;
  char sep1 = 0, sep2 = 0;
  std::istringstream in(text.substr(text.empty() ? 0 : 1));
  if (text.empty() || (text[0] != 'p' && text[0] != 'd') || !(in >> s.depth >> sep1 >> s.mid_ch >> sep2 >> s.out_ch) ||
      sep1 != ':' || sep2 != ':' || !(in >> std::ws).eof()) {
    throw ConfigError("stage `" + text + "` is not of the form <p|d><depth>:<mid>:<out>");
  }
  s.mode = text[0] == 'p' ? RsuMode::pooling : RsuMode::dilated;
  return s;
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

}  // namespace

std::string to_string(Preset p) {
  switch (p) {
    case Preset::tiny: return "tiny";
    case Preset::small: return "small";
    case Preset::full: return "full";
  }
  return "tiny";
}

Preset parse_preset(const std::string& s) {
  if (s == "tiny") return Preset::tiny;
  if (s == "small") return Preset::small;
  if (s == "full") return Preset::full;
  throw ConfigError("unknown preset `" + s + "` (expected tiny, small or full)");
}

std::string to_string(GateKind g) { return g == GateKind::sigmoid ? "sigmoid" : "relu"; }

GateKind parse_gate_kind(const std::string& s) {
  if (s == "sigmoid") return GateKind::sigmoid;
  if (s == "relu") return GateKind::relu;
  throw ConfigError("unknown gate_kind `" + s + "` (expected sigmoid or relu)");
}

ModelConfig ModelConfig::from_preset(Preset preset) {
  ModelConfig cfg;
  cfg.preset = preset;
  switch (preset) {
    case Preset::tiny:
      cfg.encoders = {pool(4, 4, 8), pool(3, 8, 16), dil(4, 16, 16)};
      cfg.decoders = {pool(4, 4, 8), pool(3, 8, 8)};
      break;
    case Preset::small:
      cfg.encoders = {pool(5, 8, 16), pool(4, 16, 32), dil(4, 16, 32), dil(4, 32, 32)};
      cfg.decoders = {pool(5, 8, 16), pool(4, 16, 16), dil(4, 16, 32)};
      break;
    case Preset::full:
      cfg.encoders = {pool(7, 32, 64),  pool(6, 32, 128), pool(5, 64, 256),
                      pool(4, 128, 512), dil(4, 256, 512), dil(4, 256, 512)};
      cfg.decoders = {pool(7, 16, 64), pool(6, 32, 64), pool(5, 64, 128), pool(4, 128, 256), dil(4, 256, 512)};
      break;
  }
  return cfg;
}

ModelConfig ModelConfig::from_kv(const KvConfig& kv) {
  kv.reject_unknown({"preset", "stages", "ica_enabled", "gate_kind", "input_channels"}, {"mid_ch."});
  ModelConfig cfg = from_preset(parse_preset(kv.get("preset").value_or("tiny")));
  if (auto stages = kv.get("stages")) {
    std::vector<StageSpec> all;
    std::istringstream in(*stages);
    std::string item;
    while (std::getline(in, item, ',')) all.push_back(parse_stage(trim(item)));
    if (all.size() < 5 || all.size() % 2 == 0) {
      throw ConfigError("`stages` needs 2S-1 entries with S >= 3, got " + std::to_string(all.size()));
    }
    const size_t s = (all.size() + 1) / 2;
    cfg.encoders.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(s));
    cfg.decoders.clear();
    for (size_t i = all.size(); i-- > s;) cfg.decoders.push_back(all[i]);
  }
  const size_t total = cfg.encoders.size() + cfg.decoders.size();
  for (const auto& [key, value] : kv.values()) {
    if (key.rfind("mid_ch.", 0) != 0) continue;
    int64_t stage = 0;
    try {
      size_t used = 0;
      stage = std::stoll(key.substr(7), &used);
      if (used != key.size() - 7) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw ConfigError("bad key `" + key + "`; expected mid_ch.<stage index>");
    }
    if (stage < 1 || static_cast<size_t>(stage) > total) {
      throw ConfigError("`" + key + "` is outside stages 1.." + std::to_string(total));
    }
    const size_t i = static_cast<size_t>(stage - 1);
    if (i < cfg.encoders.size()) {
      cfg.encoders[i].mid_ch = kv.get_int(key, 0);
    } else {
      // stage order continues De(S-1)..De1
      cfg.decoders[total - 1 - i].mid_ch = kv.get_int(key, 0);
    }
  }
  cfg.ica_enabled = kv.get_bool("ica_enabled", true);
  cfg.gate_kind = parse_gate_kind(kv.get("gate_kind").value_or("sigmoid"));
  cfg.input_channels = kv.get_int("input_channels", 3);
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) { return from_kv(KvConfig::load(path)); }

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "preset = " << to_string(preset) << '\n';
  os << "stages = ";
  for (size_t i = 0; i < encoders.size(); ++i) os << (i ? "," : "") << stage_text(encoders[i]);
  for (size_t i = decoders.size(); i-- > 0;) os << ',' << stage_text(decoders[i]);
  os << '\n';
  os << "ica_enabled = " << (ica_enabled ? "true" : "false") << '\n';
  os << "gate_kind = " << to_string(gate_kind) << '\n';
  os << "input_channels = " << input_channels << '\n';
  return os.str();
}

void ModelConfig::validate() const {
  const size_t s = encoders.size();
  if (s < 3) throw ConfigError("model needs at least 3 encoder stages, got " + std::to_string(s));
  if (decoders.size() != s - 1) {
    throw ConfigError("model needs " + std::to_string(s - 1) + " decoder stages, got " +
                      std::to_string(decoders.size()));
  }
  if (encoders.back().mode != RsuMode::dilated) throw ConfigError("the bottom encoder stage must be dilated mode");
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  for (int level = 1; level <= num_levels(); ++level) encoder_spec(level).validate();
  for (int level = 1; level < num_levels(); ++level) {
    decoder_spec(level).validate();
    if (ica_enabled) {
      const int64_t c = encoders[static_cast<size_t>(level - 1)].out_ch;
      if (c % ica_reduction != 0 || c < ica_reduction) {
        throw ConfigError("En" + std::to_string(level) + " width " + std::to_string(c) +
                          " must be a multiple of the attention reduction " + std::to_string(ica_reduction));
      }
    }
  }
}

int64_t ModelConfig::spatial_multiple() const {
  int64_t multiple = int64_t{1} << (num_levels() - 1);
  for (int level = 1; level <= num_levels(); ++level) {
    const int64_t scale = int64_t{1} << (level - 1);
    multiple = std::max(multiple, scale * encoder_spec(level).spatial_multiple());
    if (level < num_levels()) multiple = std::max(multiple, scale * decoder_spec(level).spatial_multiple());
  }
  return multiple;
}

void ModelConfig::check_input(int64_t h, int64_t w) const {
  const int64_t m = spatial_multiple();
  if (h % m == 0 && w % m == 0) return;
  const int64_t ph = (m - h % m) % m, pw = (m - w % m) % m;
  throw ShapeError("input " + std::to_string(h) + "x" + std::to_string(w) + " must be a multiple of " +
                   std::to_string(m) + " on both sides; pad by " + std::to_string(ph) + " rows and " +
                   std::to_string(pw) + " columns to " + std::to_string(h + ph) + "x" + std::to_string(w + pw));
}

RsuSpec ModelConfig::encoder_spec(int level) const {
  const StageSpec& s = encoders.at(static_cast<size_t>(level - 1));
  const int64_t in = level == 1 ? input_channels : encoders[static_cast<size_t>(level - 2)].out_ch;
  return {s.depth, in, s.mid_ch, s.out_ch, s.mode};
}

int64_t ModelConfig::skip_channels(int level) const {
  const int64_t c = encoders.at(static_cast<size_t>(level - 1)).out_ch;
  return ica_enabled ? 2 * c : c;
}

RsuSpec ModelConfig::decoder_spec(int level) const {
  const StageSpec& s = decoders.at(static_cast<size_t>(level - 1));
  const int64_t high = level == num_levels() - 1 ? encoders.back().out_ch : decoders[static_cast<size_t>(level)].out_ch;
  return {s.depth, high + skip_channels(level), s.mid_ch, s.out_ch, s.mode};
}

}  // namespace uiu
