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
#include <optional>

#include "uiu/train.hpp"

namespace uiu {

/// Checkpoint container:
///   "UIUC" | u8 version | u32 entry count |
///   entries of (u16 name length, UTF-8 name, UIUT tensor blob).
///
/// Entries, in order: meta.model_cfg and meta.train_cfg (config text, one
/// byte per element), meta.step (u64 as four 16-bit limbs, low first),
/// every model tensor, then adam.m.<name> / adam.v.<name> per learnable
/// tensor.
inline constexpr uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams model;
  TrainConfig train_cfg;
  AdamState adam;
  int64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model, const TrainConfig& train_cfg,
                     const AdamState& adam);

/// Rebuilds the model from the embedded config. Throws FormatError on any
/// malformed, truncated or incomplete file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies tensors into an already built model. Every tensor must exist with
/// a matching shape; the error names the first offender. `model` is left
/// untouched on failure.
void load_checkpoint_into(const std::filesystem::path& path, ModelParams& model);

}  // namespace uiu
