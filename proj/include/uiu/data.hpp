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

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uiu/prng.hpp"
#include "uiu/tensor.hpp"

namespace uiu {

struct Background {
  enum class Kind { flat, lowpass_noise, gradient };
  Kind kind = Kind::flat;
  float level = 0.0f;   // mean intensity
  float cutoff = 0.1f;  // lowpass_noise: cutoff in cycles per pixel
  float gain = 0.0f;    // lowpass_noise: std of the smoothed field; gradient: end-to-end rise
  float angle = 0.0f;   // gradient: direction in radians, 0 = left to right
};

struct Target {
  float cx = 0.0f;  // column, px
  float cy = 0.0f;  // row, px
  float sigma = 1.0f;
  float amplitude = 1.0f;
};

/// Ground truth covers pixels where a target's Gaussian reaches this
/// fraction of its amplitude: e^-2, a radius of 2 sigma.
inline const float kDefaultMaskLevel = static_cast<float>(std::exp(-2.0));

/// Largest allowed target footprint side (6 sigma box), exclusive.
inline constexpr float kMaxTargetExtent = 30.0f;

struct SceneSpec {
  int64_t width = 64;
  int64_t height = 64;
  Background background;
  std::vector<Target> targets;
  float noise_std = 0.0f;
  uint64_t seed = 0;
  float mask_level = kDefaultMaskLevel;

  /// Throws std::invalid_argument naming the offending target index.
  void validate() const;
};

struct Sample {
  std::string name;
  Tensor image;  // [1,3,H,W], grey replicated
  Tensor mask;   // [1,1,H,W], values 0 or 1
  std::optional<SceneSpec> spec;
};

/// image = clamp(background + sum of Gaussians + noise, 0, 1); a pure
/// function of the scene spec, seed included.
Sample gen_scene(const SceneSpec& spec);

/// Ranges from which gen_dataset draws scenes.
struct DatasetTemplate {
  int64_t size = 64;
  int min_targets = 1;
  int max_targets = 3;
  float sigma_min = 1.0f;
  float sigma_max = 2.5f;
  float amplitude_min = 0.5f;
  float amplitude_max = 1.0f;
  float level_min = 0.1f;
  float level_max = 0.35f;
  float clutter_gain = 0.08f;
  float noise_std = 0.02f;

  void validate() const;
};

/// Scene `index` of a dataset keyed on `seed`.
SceneSpec sample_scene_spec(const DatasetTemplate& tmpl, uint64_t seed, int64_t index);

std::vector<Sample> gen_dataset(int64_t n, const DatasetTemplate& tmpl, uint64_t seed);

/// Writes `<name>.img.pgm`, `<name>.mask.pgm` per sample and manifest.csv
/// with columns filename,targets,centers (centers as `x:y` joined by ';').
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);

/// Binary PGM (P5, maxval 255) <-> [1,1,H,W] tensor with value = byte/255.
Tensor load_pgm(const std::filesystem::path& path);
/// Writes round-half-up(clamp(v,0,1) * 255) from the first channel of the first image.
void save_pgm(const Tensor& t, const std::filesystem::path& path);
uint8_t to_byte(float v);

/// Loads `*.img.pgm` / `*.mask.pgm` pairs sorted by name. Masks are
/// binarized at 128/255.
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

/// [1,1,H,W] -> [1,C,H,W] by replication.
Tensor replicate_channels(const Tensor& grey, int64_t channels);

/// Concatenates samples along N. All samples must share H,W.
Tensor stack_images(const std::vector<const Sample*>& batch);
Tensor stack_masks(const std::vector<const Sample*>& batch);

}  // namespace uiu
