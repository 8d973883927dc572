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
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "uiu/data.hpp"
#include "uiu/kv_config.hpp"
#include "uiu/model.hpp"

namespace uiu {

/// Optimizer and loop settings. Config file keys match the field names;
/// loss_weights is a comma list of K+1 values, fused head last.
struct TrainConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps_adam = 1e-8f;
  int64_t batch_size = 3;
  int64_t epochs = 500;
  int64_t max_steps = 0;  // 0: no cap
  uint64_t seed = 0;
  std::vector<float> loss_weights;  // empty: all ones
  float iou_threshold = 0.5f;
  int64_t checkpoint_every = 0;  // epochs between checkpoints, 0: only at the end

  static TrainConfig from_kv(const KvConfig& kv);
  static TrainConfig load(const std::filesystem::path& path);
  std::string to_text() const;
  /// Throws ConfigError; `outputs` is K+1 for the model being trained.
  void validate(int outputs) const;
  std::vector<float> weights_for(int outputs) const;

  bool operator==(const TrainConfig&) const = default;
};

/// First and second moments per learnable tensor, in ParamStore order.
struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  int64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int64_t step) : std::runtime_error(what), step_(step) {}
  int64_t step() const { return step_; }

 private:
  int64_t step_;
};

/// sum_k weights[k] * bce(sigmoid(logits_k), target), fused term last.
Tensor total_loss(const SideOutputs& outputs, const Tensor& target, const std::vector<float>& weights);

/// Bias-corrected Adam over every learnable tensor of `store`.
void adam_step(ParamStore& store, AdamState& state, const TrainConfig& cfg);

struct StepRecord {
  int64_t step = 0;  // 1-based optimizer step
  double loss = 0.0;
  double iou = 0.0;  // fused map on the step's batch
};

struct TrainOptions {
  std::filesystem::path checkpoint;  // empty: no checkpoint files
  std::filesystem::path loss_csv;    // empty: no loss curve file
  std::ostream* log = nullptr;       // per-epoch summary lines
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_loss;  // mean loss per epoch
  AdamState adam;
};

/// Deterministic loop: per-epoch shuffle from (seed, epoch), BN in training
/// mode, Adam after every batch. Throws TrainingError on a non-finite loss.
TrainResult train_loop(ModelParams& model, const std::vector<Sample>& dataset, const TrainConfig& cfg,
                       const TrainOptions& options = {});

/// `step,loss,iou` rows.
void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& steps);

}  // namespace uiu
