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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uiu/ica.hpp"
#include "uiu/kv_config.hpp"
#include "uiu/rsu.hpp"

namespace uiu {

enum class Preset { tiny, small, full };

std::string to_string(Preset p);
Preset parse_preset(const std::string& s);
std::string to_string(GateKind g);
GateKind parse_gate_kind(const std::string& s);

/// One stage of the outer U. Input channels are derived from the layout.
struct StageSpec {
  RsuMode mode = RsuMode::pooling;
  int depth = 4;
  int64_t mid_ch = 16;
  int64_t out_ch = 16;

  bool operator==(const StageSpec&) const = default;
};

/// Layout of the nested network.
///
/// Config file keys (flat `key = value`):
///   preset       tiny | small | full; supplies the default layout
///   stages       comma list of 2S-1 stages `<p|d><depth>:<mid>:<out>` in
///                order En1..EnS, De(S-1)..De1
///   mid_ch.<i>   override mid channels of stage i (1-based, same order)
///   ica_enabled  true | false
///   gate_kind    sigmoid | relu
///   input_channels
struct ModelConfig {
  Preset preset = Preset::tiny;
  int64_t input_channels = 3;
  std::vector<StageSpec> encoders;  // En1..EnS
  std::vector<StageSpec> decoders;  // decoders[i] is De(i+1)
  bool ica_enabled = true;
  GateKind gate_kind = GateKind::sigmoid;
  int64_t ica_reduction = 4;

  static ModelConfig from_preset(Preset preset);
  static ModelConfig from_kv(const KvConfig& kv);
  static ModelConfig load(const std::filesystem::path& path);
  /// Canonical text that from_kv parses back to an equal config.
  std::string to_text() const;

  void validate() const;

  int num_levels() const { return static_cast<int>(encoders.size()); }
  /// Supervised side outputs K: every decoder plus the bottom stage.
  int num_side_outputs() const { return num_levels(); }
  /// Input H and W must be multiples of this.
  int64_t spatial_multiple() const;
  /// Throws ShapeError naming the padding needed when H,W do not fit.
  void check_input(int64_t h, int64_t w) const;

  RsuSpec encoder_spec(int level) const;  // level 1..S
  RsuSpec decoder_spec(int level) const;  // level 1..S-1
  /// Channels of the skip tensor entering De<level>.
  int64_t skip_channels(int level) const;

  bool operator==(const ModelConfig&) const = default;
};

/// Every tensor of a built network. Copying is disabled because members
/// are handles into the same storage as `store`.
struct ModelParams {
  ModelConfig cfg;
  ParamStore store;
  std::vector<RsuParams> encoders;  // En1..EnS
  std::vector<RsuParams> decoders;  // decoders[i] is De(i+1)
  std::vector<Conv> projections;    // projections[i] feeds ica[i]
  std::vector<IcaParams> ica;       // ica[i] replaces the skip into De(i+1)
  std::vector<Conv> side_heads;     // side_heads[k]: De(k+1), last is the bottom stage
  Conv fuse;

  ModelParams() = default;
  ModelParams(ModelParams&&) = default;
  ModelParams& operator=(ModelParams&&) = default;
  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;
};

/// Logit maps at input resolution; probabilities are their sigmoid.
struct SideOutputs {
  std::vector<Tensor> side;  // side[k] from De(k+1); side.back() from the bottom stage
  Tensor fused;

  /// side maps followed by the fused map, matching the loss weight order.
  std::vector<Tensor> all_logits() const;
  std::vector<Tensor> probabilities() const;
};

/// Intermediate tensors kept for inspection.
struct ForwardTrace {
  std::vector<Tensor> encoder;  // En1..EnS outputs
  std::vector<Tensor> skips;    // skips[i] enters De(i+1)
  std::vector<Tensor> decoder;  // decoder[i] is De(i+1) output
};

/// Builds encoders first so the encoder weights do not depend on the
/// decoder-side switches.
ModelParams build_model(const ModelConfig& cfg, Prng& rng);

SideOutputs forward(const ModelParams& params, const Tensor& x, bool training,
                    ForwardTrace* trace = nullptr);

/// Learnable values in a built model.
int64_t count_params(const ModelParams& params);
/// Same count in closed form from the config.
int64_t count_params(const ModelConfig& cfg);
/// Multiply-accumulates of every conv and linear for one HxW image.
int64_t count_macs(const ModelConfig& cfg, int64_t h, int64_t w);
/// Floating-point operations at 2 per multiply-accumulate.
inline int64_t count_flops(const ModelConfig& cfg, int64_t h, int64_t w) { return 2 * count_macs(cfg, h, w); }

/// Eval-mode fused probability map [N,1,H,W]. Single-channel images are
/// replicated to the model's input channels.
Tensor infer(const ModelParams& params, const Tensor& image);

}  // namespace uiu
