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

#include "uiu/rsu.hpp"

#include "uiu/ops.hpp"

namespace uiu {

void RsuSpec::validate() const {
  if (depth < 2) throw ShapeError("rsu: depth must be >= 2, got " + std::to_string(depth));
  if (in_ch < 1 || mid_ch < 1 || out_ch < 1) throw ShapeError("rsu: channel counts must be >= 1");
}

std::vector<int> RsuSpec::dilation_schedule() const {
  std::vector<int> schedule(static_cast<size_t>(depth), 1);
  if (mode == RsuMode::pooling) {
    schedule.back() = 2;
  } else {
    for (int j = 1; j < depth; ++j) schedule[static_cast<size_t>(j)] = 2 * schedule[static_cast<size_t>(j - 1)];
  }
  return schedule;
}

int64_t RsuSpec::spatial_multiple() const {
  return mode == RsuMode::pooling ? (int64_t{1} << (depth - 2)) : 1;
}

int64_t RsuSpec::param_count() const {
  auto stage = [](int64_t cin, int64_t cout) {
    return conv_param_count(cin, cout, 3, true) + batch_norm_param_count(cout);
  };
  int64_t total = stage(in_ch, out_ch) + stage(out_ch, mid_ch);
  total += (depth - 2) * stage(mid_ch, mid_ch);  // enc2..enc(L-1)
  total += stage(mid_ch, mid_ch);                // bottom
  total += (depth - 2) * stage(2 * mid_ch, mid_ch);
  total += stage(2 * mid_ch, out_ch);            // dec1
  return total;
}

RsuParams build_rsu(const RsuSpec& spec, Prng& rng, ParamStore& store, const std::string& prefix) {
  spec.validate();
  const auto dil = spec.dilation_schedule();
  RsuParams p;
  p.spec = spec;
  p.input = make_conv_bn_relu(store, prefix + ".in", spec.in_ch, spec.out_ch, 1, rng);
  for (int j = 1; j < spec.depth; ++j) {
    const int64_t cin = j == 1 ? spec.out_ch : spec.mid_ch;
    p.encoder.push_back(make_conv_bn_relu(store, prefix + ".enc" + std::to_string(j), cin, spec.mid_ch,
                                          dil[static_cast<size_t>(j - 1)], rng));
  }
  p.bottom = make_conv_bn_relu(store, prefix + ".bottom", spec.mid_ch, spec.mid_ch, dil.back(), rng);
  p.decoder.resize(static_cast<size_t>(spec.depth - 1));
  for (int j = spec.depth - 1; j >= 1; --j) {
    const int64_t cout = j == 1 ? spec.out_ch : spec.mid_ch;
    p.decoder[static_cast<size_t>(j - 1)] = make_conv_bn_relu(
        store, prefix + ".dec" + std::to_string(j), 2 * spec.mid_ch, cout, dil[static_cast<size_t>(j - 1)], rng);
  }
  return p;
}

Tensor rsu_forward(const RsuParams& params, const Tensor& x, bool training) {
  return rsu_forward(params, x, training, nullptr);
}

Tensor rsu_forward(const RsuParams& params, const Tensor& x, bool training, Tensor* input_features) {
  const RsuSpec& spec = params.spec;
  const Shape& s = x.shape();
  const int64_t multiple = spec.spatial_multiple();
  if (s.h % multiple != 0 || s.w % multiple != 0) {
    throw ShapeError("rsu: input " + s.str() + " must have H,W divisible by " + std::to_string(multiple) +
                     " for depth " + std::to_string(spec.depth) + " pooling mode");
  }
  if (s.c != spec.in_ch) {
    throw ShapeError("rsu: expected " + std::to_string(spec.in_ch) + " input channels, got " + s.str());
  }
  const bool pool = spec.mode == RsuMode::pooling;

  Tensor fx = params.input.forward(x, training);
  std::vector<Tensor> skips;
  Tensor h = fx;
  for (size_t j = 0; j < params.encoder.size(); ++j) {
    if (pool && j > 0) h = ops::max_pool2d(h, 2, 2);
    h = params.encoder[j].forward(h, training);
    skips.push_back(h);
  }
  Tensor d = params.bottom.forward(h, training);
  for (size_t j = params.decoder.size(); j-- > 0;) {
    const Tensor& skip = skips[j];
    if (d.shape().h != skip.shape().h || d.shape().w != skip.shape().w) {
      d = ops::upsample_bilinear(d, skip.shape().h, skip.shape().w);
    }
    d = params.decoder[j].forward(ops::concat_channels({d, skip}), training);
  }
  if (input_features != nullptr) *input_features = fx;
  return ops::add(d, fx);
}

int64_t rsu_receptive_field(const RsuSpec& spec) {
  spec.validate();
  const auto dil = spec.dilation_schedule();
  const bool pool = spec.mode == RsuMode::pooling;
  int64_t rf = 1;
  int64_t jump = 1;
  auto conv = [&](int d) { rf += (conv_receptive_field(3, d) - 1) * jump; };
  conv(1);  // input conv
  for (int j = 1; j < spec.depth; ++j) {
    if (pool && j > 1) {
      rf += jump;
      jump *= 2;
    }
    conv(dil[static_cast<size_t>(j - 1)]);
  }
  conv(dil.back());
  for (int j = spec.depth - 1; j >= 1; --j) {
    if (pool && j < spec.depth - 1) {
      rf += jump;
      jump /= 2;
    }
    conv(dil[static_cast<size_t>(j - 1)]);
  }
  return rf;
}

}  // namespace uiu
