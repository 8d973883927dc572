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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "uiu/tensor.hpp"

namespace uiu {

/// Pixel counts of a binary prediction against a binary reference.
struct ConfusionCounts {
  uint64_t tp = 0;
  uint64_t fp = 0;
  uint64_t fn = 0;
  uint64_t tn = 0;

  uint64_t total() const { return tp + fp + fn + tn; }
  uint64_t truth() const { return tp + fn; }      // T
  uint64_t predicted() const { return tp + fp; }  // P
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

/// pixel >= thr -> 1 else 0.
Tensor binarize(const Tensor& scores, float thr);

/// Counts on masks/scores of equal size; a pixel is positive when >= thr.
ConfusionCounts confusion(const Tensor& scores, const Tensor& truth, float thr = 0.5f);

/// How a sample with empty truth and empty prediction scores (0/0).
enum class EmptyPolicy { one, zero };

double sample_iou(const ConfusionCounts& c, EmptyPolicy policy = EmptyPolicy::one);

/// sum TP / (sum T + sum P - sum TP) over all samples; 1 when the union is empty.
double iou_dataset(std::span<const Tensor> preds, std::span<const Tensor> truths);
std::vector<double> per_sample_iou(std::span<const Tensor> preds, std::span<const Tensor> truths,
                                   EmptyPolicy policy = EmptyPolicy::one);
/// Mean of per-sample IoU.
double niou(std::span<const Tensor> preds, std::span<const Tensor> truths, EmptyPolicy policy = EmptyPolicy::one);

/// standard: FP / (FP + TN). paper_literal: FP / P with P the predicted
/// positive count (0 when nothing is predicted).
enum class FprMode { standard, paper_literal };

struct RocPoint {
  float threshold = 0.0f;
  double tpr = 0.0;
  double fpr = 0.0;           // per the curve's mode
  double fpr_standard = 0.0;  // always FP / (FP + TN)
  ConfusionCounts counts;
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds in descending order
  double auc = 0.0;
  FprMode fpr_mode = FprMode::standard;
};

/// Thresholds are n evenly spaced values over [0,1] plus {0,1}. AUC is the
/// trapezoid over standard-mode points, anchored at (0,0).
RocCurve roc(std::span<const Tensor> scores, std::span<const Tensor> truths, int n_thresholds,
             FprMode mode = FprMode::standard);

std::vector<float> roc_thresholds(int n_thresholds);

struct Components {
  int64_t count = 0;
  std::vector<int32_t> labels;               // 0 background, 1..count objects
  std::vector<std::vector<int64_t>> pixels;  // flat indices per object
};

/// 8-connected labelling of the first H x W plane of a mask.
Components connected_components(const Tensor& mask);

struct MetricsReport {
  float threshold = 0.5f;
  double iou = 0.0;
  double niou = 0.0;
  std::vector<double> per_sample_iou;
  RocCurve roc;
  int64_t n_samples = 0;
  std::vector<int64_t> objects_per_sample;
  ConfusionCounts totals;
};

MetricsReport evaluate(std::span<const Tensor> scores, std::span<const Tensor> truths, float threshold,
                       int n_thresholds, FprMode mode = FprMode::standard, EmptyPolicy policy = EmptyPolicy::one);

/// `metric,value` rows.
void write_report_csv(const std::filesystem::path& path, const MetricsReport& report);
/// `thr,fpr,tpr` rows.
void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
void write_roc_svg(const std::filesystem::path& path, const RocCurve& curve);

}  // namespace uiu
