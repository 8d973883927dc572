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

#include "uiu/ica.hpp"

#include <cmath>

#include "uiu/ops.hpp"

namespace uiu {

namespace {

Tensor init_matrix(int64_t rows, int64_t cols, Prng& rng) {
  Tensor w({rows, cols, 1, 1});
  const double std_dev = std::sqrt(2.0 / static_cast<double>(cols));
  for (float& v : w.data()) v = static_cast<float>(rng.normal() * std_dev);
  return w;
}

void check_channels(int64_t channels, int64_t reduction) {
  if (reduction < 1 || channels < reduction || channels % reduction != 0) {
    throw ShapeError("ica: channels " + std::to_string(channels) + " not divisible by reduction " +
                     std::to_string(reduction));
  }
}

}  // namespace

IcaParams build_ica(int64_t channels, Prng& rng, ParamStore& store, const std::string& prefix,
                    int64_t reduction) {
  check_channels(channels, reduction);
  IcaParams p;
  p.channels = channels;
  p.reduction = reduction;
  const int64_t r = channels / reduction;
  p.w1 = store.add(prefix + ".w1", init_matrix(r, channels, rng), ParamKind::weight);
  p.b1 = store.add(prefix + ".b1", Tensor({r, 1, 1, 1}), ParamKind::weight);
  p.bn1 = make_batch_norm(store, prefix + ".bn1", r);
  p.w2 = store.add(prefix + ".w2", init_matrix(channels, r, rng), ParamKind::weight);
  p.b2 = store.add(prefix + ".b2", Tensor({channels, 1, 1, 1}), ParamKind::weight);
  p.bn2 = make_batch_norm(store, prefix + ".bn2", channels);
  p.c1 = make_conv(store, prefix + ".c1", channels, r, 1, 1, false, rng);
  p.bn3 = make_batch_norm(store, prefix + ".c1.bn", r);
  p.c3 = make_conv(store, prefix + ".c3", 2, 1, 3, 1, true, rng);
  return p;
}

int64_t ica_param_count(int64_t channels, int64_t reduction) {
  check_channels(channels, reduction);
  const int64_t r = channels / reduction;
  return (r * channels + r) + batch_norm_param_count(r) + (channels * r + channels) +
         batch_norm_param_count(channels) + conv_param_count(channels, r, 1, false) +
         batch_norm_param_count(r) + conv_param_count(2, 1, 3, true);
}

Tensor channel_attention(const Tensor& f_h, const Tensor& f_l, const IcaParams& params, bool training,
                         Tensor* gate) {
  if (f_h.shape() != f_l.shape()) {
    throw ShapeError("channel_attention: high-level " + f_h.shape().str() + " vs low-level " +
                     f_l.shape().str());
  }
  if (f_h.shape().c != params.channels) {
    throw ShapeError("channel_attention: expected " + std::to_string(params.channels) + " channels, got " +
                     f_h.shape().str());
  }
  Tensor z = ops::global_avg_pool(f_h);
  Tensor e = ops::relu(params.bn1.forward(ops::linear(z, params.w1, params.b1), training));
  Tensor a = ops::sigmoid(params.bn2.forward(ops::linear(e, params.w2, params.b2), training));
  if (gate != nullptr) *gate = a;
  return ops::mul_broadcast(f_l, a);
}

Tensor spatial_attention(const Tensor& f_ca, const Tensor& f_h, const IcaParams& params, GateKind kind,
                         bool training, Tensor* gate) {
  if (f_ca.shape() != f_h.shape()) {
    throw ShapeError("spatial_attention: " + f_ca.shape().str() + " vs " + f_h.shape().str());
  }
  check_channels(f_ca.shape().c, params.reduction);
  Tensor t = ops::relu(params.bn3.forward(params.c1.forward(f_ca), training));
  Tensor pooled = ops::concat_channels({ops::channel_pool(t, ops::ChannelPool::avg),
                                        ops::channel_pool(t, ops::ChannelPool::max)});
  Tensor logits = params.c3.forward(pooled);
  Tensor a = kind == GateKind::sigmoid ? ops::sigmoid(logits) : ops::relu(logits);
  if (gate != nullptr) *gate = a;
  return ops::mul_broadcast(f_h, a);
}

IcaOutput ica_forward(const Tensor& f_h_raw, const Tensor& f_l, const IcaParams& params, GateKind kind,
                      bool training) {
  const Shape& hs = f_h_raw.shape();
  const Shape& ls = f_l.shape();
  Tensor f_h = f_h_raw;
  if (hs.h != ls.h || hs.w != ls.w) f_h = ops::upsample_bilinear(f_h_raw, ls.h, ls.w);
  IcaOutput out;
  out.f_ca = channel_attention(f_h, f_l, params, training);
  out.f_ica = spatial_attention(out.f_ca, f_h, params, kind, training);
  out.fused = ops::concat_channels({out.f_ca, out.f_ica});
  return out;
}

}  // namespace uiu
