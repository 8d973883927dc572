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

#include "uiu/layers.hpp"

#include <cmath>

#include "uiu/ops.hpp"

namespace uiu {

Tensor ParamStore::add(std::string name, Tensor tensor, ParamKind kind) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name " + name);
  if (kind == ParamKind::weight) tensor.set_requires_grad(true);
  entries_.push_back({std::move(name), tensor, kind});
  return tensor;
}

const Tensor* ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e.tensor;
  }
  return nullptr;
}

int64_t ParamStore::count(ParamKind kind) const {
  int64_t total = 0;
  for (const auto& e : entries_) {
    if (e.kind == kind) total += e.tensor.numel();
  }
  return total;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) {
    if (e.kind == ParamKind::weight) e.tensor.zero_grad();
  }
}

Tensor Conv::forward(const Tensor& x) const { return ops::conv2d(x, w, b, 1, pad, dilation); }

Tensor BatchNorm::forward(const Tensor& x, bool training) const {
  Tensor rm = running_mean;
  Tensor rv = running_var;
  return ops::batch_norm(x, gamma, beta, rm, rv, eps, momentum, training);
}

Tensor ConvBnRelu::forward(const Tensor& x, bool training) const {
  return ops::relu(bn.forward(conv.forward(x), training));
}

Conv make_conv(ParamStore& store, const std::string& name, int64_t cin, int64_t cout, int64_t k,
               int dilation, bool bias, Prng& rng) {
  Tensor w({cout, cin, k, k});
  const double std_dev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
  for (float& v : w.data()) v = static_cast<float>(rng.normal() * std_dev);
  Conv conv;
  conv.w = store.add(name + ".w", w, ParamKind::weight);
  if (bias) conv.b = store.add(name + ".b", Tensor({cout, 1, 1, 1}), ParamKind::weight);
  conv.dilation = dilation;
  conv.pad = dilation * static_cast<int>((k - 1) / 2);
  return conv;
}

BatchNorm make_batch_norm(ParamStore& store, const std::string& name, int64_t channels) {
  BatchNorm bn;
  const Shape s{channels, 1, 1, 1};
  bn.gamma = store.add(name + ".gamma", Tensor::full(s, 1.0f), ParamKind::weight);
  bn.beta = store.add(name + ".beta", Tensor(s), ParamKind::weight);
  bn.running_mean = store.add(name + ".running_mean", Tensor(s), ParamKind::buffer);
  bn.running_var = store.add(name + ".running_var", Tensor::full(s, 1.0f), ParamKind::buffer);
  return bn;
}

ConvBnRelu make_conv_bn_relu(ParamStore& store, const std::string& name, int64_t cin, int64_t cout,
                             int dilation, Prng& rng) {
  ConvBnRelu layer;
  layer.conv = make_conv(store, name, cin, cout, 3, dilation, true, rng);
  layer.bn = make_batch_norm(store, name + ".bn", cout);
  return layer;
}

}  // namespace uiu
