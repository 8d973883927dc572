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

#include "uiu/model.hpp"

#include "uiu/ops.hpp"

namespace uiu {

std::vector<Tensor> SideOutputs::all_logits() const {
  std::vector<Tensor> out = side;
  out.push_back(fused);
  return out;
}

std::vector<Tensor> SideOutputs::probabilities() const {
  std::vector<Tensor> out;
  for (const Tensor& t : all_logits()) out.push_back(ops::sigmoid(t));
  return out;
}

ModelParams build_model(const ModelConfig& cfg, Prng& rng) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  const int levels = cfg.num_levels();
  for (int level = 1; level <= levels; ++level) {
    p.encoders.push_back(build_rsu(cfg.encoder_spec(level), rng, p.store, "rsu" + std::to_string(level)));
  }
  p.decoders.resize(static_cast<size_t>(levels - 1));
  if (cfg.ica_enabled) {
    p.projections.resize(static_cast<size_t>(levels - 1));
    p.ica.resize(static_cast<size_t>(levels - 1));
  }
  // Stage numbering continues in forward order: De(S-1) is rsu(S+1).
  for (int level = levels - 1; level >= 1; --level) {
    const size_t i = static_cast<size_t>(level - 1);
    const std::string tag = std::to_string(level);
    if (cfg.ica_enabled) {
      const int64_t high = cfg.decoder_spec(level).in_ch - cfg.skip_channels(level);
      const int64_t low = cfg.encoders[i].out_ch;
      p.projections[i] = make_conv(p.store, "proj" + tag, high, low, 1, 1, true, rng);
      p.ica[i] = build_ica(low, rng, p.store, "ica" + tag, cfg.ica_reduction);
    }
    p.decoders[i] = build_rsu(cfg.decoder_spec(level), rng, p.store, "rsu" + std::to_string(2 * levels - level));
  }
  for (int k = 1; k <= levels; ++k) {
    const int64_t ch = k < levels ? cfg.decoders[static_cast<size_t>(k - 1)].out_ch : cfg.encoders.back().out_ch;
    p.side_heads.push_back(make_conv(p.store, "side" + std::to_string(k), ch, 1, 3, 1, true, rng));
  }
  p.fuse = make_conv(p.store, "fuse", levels, 1, 1, 1, true, rng);
  return p;
}

SideOutputs forward(const ModelParams& params, const Tensor& x, bool training, ForwardTrace* trace) {
  const ModelConfig& cfg = params.cfg;
  const Shape& s = x.shape();
  if (s.c != cfg.input_channels) {
    throw ShapeError("model expects " + std::to_string(cfg.input_channels) + " input channels, got " + s.str());
  }
  cfg.check_input(s.h, s.w);
  const size_t levels = static_cast<size_t>(cfg.num_levels());

  std::vector<Tensor> enc;
  Tensor h = x;
  for (size_t i = 0; i < levels; ++i) {
    if (i > 0) h = ops::max_pool2d(h, 2, 2);
    h = rsu_forward(params.encoders[i], h, training);
    enc.push_back(h);
  }

  std::vector<Tensor> dec(levels - 1);
  std::vector<Tensor> skips(levels - 1);
  Tensor high = enc.back();
  for (size_t i = levels - 1; i-- > 0;) {
    const Tensor& low = enc[i];
    const int64_t lh = low.shape().h, lw = low.shape().w;
    Tensor skip = low;
    if (cfg.ica_enabled) {
      Tensor projected = params.projections[i].forward(high);
      skip = ica_forward(projected, low, params.ica[i], cfg.gate_kind, training).fused;
    }
    Tensor up = ops::upsample_bilinear(high, lh, lw);
    high = rsu_forward(params.decoders[i], ops::concat_channels({up, skip}), training);
    dec[i] = high;
    skips[i] = skip;
  }

  SideOutputs out;
  for (size_t k = 0; k < levels; ++k) {
    const Tensor& feature = k + 1 < levels ? dec[k] : enc.back();
    Tensor logit = params.side_heads[k].forward(feature);
    if (logit.shape().h != s.h || logit.shape().w != s.w) logit = ops::upsample_bilinear(logit, s.h, s.w);
    out.side.push_back(logit);
  }
  out.fused = params.fuse.forward(ops::concat_channels(std::span<const Tensor>(out.side)));

  if (trace != nullptr) {
    trace->encoder = std::move(enc);
    trace->skips = std::move(skips);
    trace->decoder = std::move(dec);
  }
  return out;
}

int64_t count_params(const ModelParams& params) { return params.store.count(ParamKind::weight); }

int64_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const int levels = cfg.num_levels();
  int64_t total = 0;
  for (int level = 1; level <= levels; ++level) total += cfg.encoder_spec(level).param_count();
  for (int level = 1; level < levels; ++level) {
    total += cfg.decoder_spec(level).param_count();
    if (cfg.ica_enabled) {
      const int64_t low = cfg.encoders[static_cast<size_t>(level - 1)].out_ch;
      const int64_t high = cfg.decoder_spec(level).in_ch - cfg.skip_channels(level);
      total += conv_param_count(high, low, 1, true) + ica_param_count(low, cfg.ica_reduction);
    }
    total += conv_param_count(cfg.decoders[static_cast<size_t>(level - 1)].out_ch, 1, 3, true);
  }
  total += conv_param_count(cfg.encoders.back().out_ch, 1, 3, true);
  total += conv_param_count(levels, 1, 1, true);
  return total;
}

namespace {

int64_t rsu_macs(const RsuSpec& spec, int64_t h, int64_t w) {
  const int64_t k9 = 9;
  int64_t macs = h * w * spec.out_ch * spec.in_ch * k9;
  const bool pool = spec.mode == RsuMode::pooling;
  int64_t eh = h, ew = w;
  std::vector<std::pair<int64_t, int64_t>> sizes;
  for (int j = 1; j < spec.depth; ++j) {
    if (pool && j > 1) {
      eh /= 2;
      ew /= 2;
    }
    const int64_t cin = j == 1 ? spec.out_ch : spec.mid_ch;
    macs += eh * ew * spec.mid_ch * cin * k9;
    sizes.emplace_back(eh, ew);
  }
  macs += eh * ew * spec.mid_ch * spec.mid_ch * k9;
  for (int j = spec.depth - 1; j >= 1; --j) {
    const auto [dh, dw] = sizes[static_cast<size_t>(j - 1)];
    const int64_t cout = j == 1 ? spec.out_ch : spec.mid_ch;
    macs += dh * dw * cout * 2 * spec.mid_ch * k9;
  }
  return macs;
}

}  // namespace

int64_t count_macs(const ModelConfig& cfg, int64_t h, int64_t w) {
  cfg.validate();
  cfg.check_input(h, w);
  const int levels = cfg.num_levels();
  int64_t macs = 0;
  for (int level = 1; level <= levels; ++level) {
    const int64_t lh = h >> (level - 1), lw = w >> (level - 1);
    macs += rsu_macs(cfg.encoder_spec(level), lh, lw);
    if (level < levels) {
      macs += rsu_macs(cfg.decoder_spec(level), lh, lw);
      if (cfg.ica_enabled) {
        const int64_t c = cfg.encoders[static_cast<size_t>(level - 1)].out_ch;
        const int64_t r = c / cfg.ica_reduction;
        const int64_t high = cfg.decoder_spec(level).in_ch - cfg.skip_channels(level);
        macs += (lh / 2) * (lw / 2) * high * c;  // projection at the coarser level
        macs += 2 * c * r;                       // excitation pair
        macs += lh * lw * (c * r + 2 * 9);       // 1x1 reduction and 3x3 gate conv
      }
      macs += lh * lw * cfg.decoders[static_cast<size_t>(level - 1)].out_ch * 9;
    } else {
      macs += lh * lw * cfg.encoders.back().out_ch * 9;
    }
  }
  macs += h * w * levels;
  return macs;
}

Tensor infer(const ModelParams& params, const Tensor& image) {
  NoGradScope no_grad;
  Tensor x = image;
  const Shape& s = image.shape();
  const int64_t cin = params.cfg.input_channels;
  if (s.c == 1 && cin > 1) {
    std::vector<Tensor> copies(static_cast<size_t>(cin), image);
    x = ops::concat_channels(std::span<const Tensor>(copies));
  }
  return ops::sigmoid(forward(params, x, false).fused);
}

}  // namespace uiu
