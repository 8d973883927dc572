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

#include <string>

#include "uiu/layers.hpp"

namespace uiu {

/// Activation applied to the spatial gate. The channel gate is always a
/// sigmoid; `relu` exists for ablation runs.
enum class GateKind { sigmoid, relu };

/// Interactive-cross attention weights for C channels and reduction r.
///
/// Channel gate:  A   = sigmoid(bn2(w2 * relu(bn1(w1 * gap(f_h) + b1)) + b2))
/// Spatial gate:  A'  = gate(c3 * [avg_c(t); max_c(t)] + c3_bias),
///                t   = relu(bn3(c1 * f_ca))
struct IcaParams {
  int64_t channels = 0;
  int64_t reduction = 4;
  Tensor w1, b1;  // [C/r, C, 1, 1], [C/r]
  BatchNorm bn1;
  Tensor w2, b2;  // [C, C/r, 1, 1], [C]
  BatchNorm bn2;
  Conv c1;  // [C/r, C, 1, 1], no bias
  BatchNorm bn3;
  Conv c3;  // [1, 2, 3, 3] + bias, pad 1

  int64_t reduced() const { return channels / reduction; }
};

struct IcaOutput {
  Tensor f_ca;   // channel-attended low-level features
  Tensor f_ica;  // spatially attended high-level features
  Tensor fused;  // [f_ca, f_ica] along channels
};

IcaParams build_ica(int64_t channels, Prng& rng, ParamStore& store, const std::string& prefix,
                    int64_t reduction = 4);

/// Learnable values of one module in closed form.
int64_t ica_param_count(int64_t channels, int64_t reduction = 4);

/// A * f_l with A computed from f_h. Both inputs share every dim.
/// `gate` receives A ([N,C,1,1]) when non-null.
Tensor channel_attention(const Tensor& f_h, const Tensor& f_l, const IcaParams& params, bool training,
                         Tensor* gate = nullptr);

/// A' * f_h with A' ([N,1,H,W]) computed from f_ca.
Tensor spatial_attention(const Tensor& f_ca, const Tensor& f_h, const IcaParams& params, GateKind kind,
                         bool training, Tensor* gate = nullptr);

/// Upsamples f_h_raw to f_l's size, then applies both attentions.
IcaOutput ica_forward(const Tensor& f_h_raw, const Tensor& f_l, const IcaParams& params, GateKind kind,
                      bool training);

}  // namespace uiu
