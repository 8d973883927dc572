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
#include <vector>

#include "uiu/layers.hpp"

namespace uiu {

enum class RsuMode {
  pooling,  // encoder-decoder with 2x2 max-pool, only the bottom conv dilated
  dilated,  // no pooling, dilation doubles per level
};

/// Architecture of one residual U-block.
struct RsuSpec {
  int depth = 4;  // encoder levels L, >= 2
  int64_t in_ch = 3;
  int64_t mid_ch = 12;
  int64_t out_ch = 3;
  RsuMode mode = RsuMode::pooling;

  void validate() const;
  /// Dilations of enc1..enc(L-1) followed by the bottom conv.
  std::vector<int> dilation_schedule() const;
  /// H and W must be multiples of this: 2^(L-2) for pooling, 1 for dilated.
  int64_t spatial_multiple() const;
  /// Learnable values of the block in closed form.
  int64_t param_count() const;
};

/// Learned tensors of one block. decoder[j-1] is dec<j>; dec1 is the top.
struct RsuParams {
  RsuSpec spec;
  ConvBnRelu input;
  std::vector<ConvBnRelu> encoder;
  ConvBnRelu bottom;
  std::vector<ConvBnRelu> decoder;

  /// dec1, the last stage before the residual sum.
  ConvBnRelu& top() { return decoder.front(); }
};

/// Registers tensors under `<prefix>.in`, `<prefix>.enc<j>`, `<prefix>.bottom`
/// and `<prefix>.dec<j>`.
RsuParams build_rsu(const RsuSpec& spec, Prng& rng, ParamStore& store, const std::string& prefix);

/// F_U = U(f(x)) + f(x), where f is the input conv. Output keeps the input
/// H,W in both modes.
Tensor rsu_forward(const RsuParams& params, const Tensor& x, bool training);

/// Same as rsu_forward, also returning f(x) for inspection.
Tensor rsu_forward(const RsuParams& params, const Tensor& x, bool training, Tensor* input_features);

inline int64_t conv_receptive_field(int64_t kernel, int dilation) { return dilation * (kernel - 1) + 1; }

/// Receptive field along the deepest path in->enc*->bottom->dec*. Bilinear
/// upsampling counts as a 2-tap kernel at the coarse scale.
int64_t rsu_receptive_field(const RsuSpec& spec);

}  // namespace uiu
