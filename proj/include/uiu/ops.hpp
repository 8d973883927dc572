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
#include <span>
#include <vector>

#include "uiu/tensor.hpp"

namespace uiu::ops {

enum class Activation { relu, sigmoid };
enum class ChannelPool { avg, max };

/// Cross-correlation with zero padding. `w` is [Cout,Cin,kh,kw] with odd
/// kernel sides; `b` is optional and holds Cout values.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 1, int pad = 0,
              int dilation = 1);

/// Output side for conv2d; throws when the size is not integral or < 1.
int64_t conv_out_size(int64_t in, int64_t kernel, int stride, int pad, int dilation);

/// Per-window maximum. Gradient goes to the first maximum in row-major
/// window order.
Tensor max_pool2d(const Tensor& x, int k, int stride);

/// Bilinear resize with half-pixel centres (align_corners=false).
Tensor upsample_bilinear(const Tensor& x, int64_t out_h, int64_t out_w);

/// Batch normalization over N,H,W per channel. In training mode the running
/// buffers are updated in place with the biased batch variance.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, float eps, float momentum, bool training);

Tensor activation(const Tensor& x, Activation kind);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Mean over H,W: [N,C,H,W] -> [N,C,1,1].
Tensor global_avg_pool(const Tensor& x);

/// Reduction over channels: [N,C,H,W] -> [N,1,H,W].
Tensor channel_pool(const Tensor& x, ChannelPool mode);

/// x * a where a matches x exactly, or is [N,1,H,W], or is [N,C,1,1].
Tensor mul_broadcast(const Tensor& x, const Tensor& a);

Tensor concat_channels(std::span<const Tensor> xs);
Tensor concat_channels(std::initializer_list<Tensor> xs);
Tensor slice_channels(const Tensor& x, int64_t begin, int64_t count);

/// y = w x + b on [N,C,1,1] inputs; w is [Cout,C,1,1], b holds Cout values.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Mean binary cross-entropy. Predictions are clamped to [1e-7, 1-1e-7].
Tensor bce_loss(const Tensor& pred, const Tensor& target);
inline constexpr float kBceClamp = 1e-7f;

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float s);
Tensor add_scalar(const Tensor& x, float s);
Tensor abs(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Counts multiply-accumulates issued by conv2d and linear on this thread
/// while alive.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;
  int64_t count() const { return count_; }

  static void add(int64_t macs);

 private:
  int64_t count_ = 0;
  MacCounter* previous_;
};

/// Pins the branch taken at every kink (relu and abs signs, pooling argmax).
/// A recording scope appends each decision to `pattern`; a replaying scope
/// reuses them in order, so the replayed function is the smooth piece that
/// contains the recorded point.
class PatternScope {
 public:
  enum class Mode { record, replay };
  PatternScope(std::vector<int64_t>& pattern, Mode mode);
  ~PatternScope();
  PatternScope(const PatternScope&) = delete;
  PatternScope& operator=(const PatternScope&) = delete;

  /// Decisions consumed so far while replaying.
  size_t consumed() const { return cursor_; }

  static PatternScope* current();
  /// Returns `observed` when recording, the stored decision when replaying.
  int64_t next(int64_t observed);

 private:
  std::vector<int64_t>& pattern_;
  Mode mode_;
  size_t cursor_ = 0;
  PatternScope* previous_;
};

}  // namespace uiu::ops
