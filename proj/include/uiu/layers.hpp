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

#include "uiu/prng.hpp"
#include "uiu/tensor.hpp"

namespace uiu {

enum class ParamKind {
  weight,  // learned, updated by the optimizer
  buffer,  // state such as batch-norm running statistics
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  ParamKind kind;
};

/// Ordered registry of every named tensor in a network. Registration order
/// is the serialization order.
class ParamStore {
 public:
  Tensor add(std::string name, Tensor tensor, ParamKind kind);

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor>& entries() { return entries_; }
  const Tensor* find(const std::string& name) const;

  int64_t count(ParamKind kind) const;
  void zero_grad();

 private:
  std::vector<NamedTensor> entries_;
};

/// Kernel [Cout,Cin,k,k] plus optional bias; stride is always 1 in this model.
struct Conv {
  Tensor w;
  Tensor b;
  int pad = 0;
  int dilation = 1;

  int64_t in_channels() const { return w.shape().c; }
  int64_t out_channels() const { return w.shape().n; }
  int64_t kernel() const { return w.shape().h; }
  Tensor forward(const Tensor& x) const;
};

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  float eps = 1e-5f;
  float momentum = 0.1f;

  Tensor forward(const Tensor& x, bool training) const;
};

/// conv -> batch norm -> relu, the basic stage of every residual U-block.
struct ConvBnRelu {
  Conv conv;
  BatchNorm bn;

  Tensor forward(const Tensor& x, bool training) const;
};

/// Kernel drawn from N(0, 2/fan_in); bias zero. Padding keeps H,W for
/// odd kernels: pad = dilation * (k-1)/2.
Conv make_conv(ParamStore& store, const std::string& name, int64_t cin, int64_t cout, int64_t k,
               int dilation, bool bias, Prng& rng);

/// gamma=1, beta=0, running mean 0, running variance 1.
BatchNorm make_batch_norm(ParamStore& store, const std::string& name, int64_t channels);

ConvBnRelu make_conv_bn_relu(ParamStore& store, const std::string& name, int64_t cin, int64_t cout,
                             int dilation, Prng& rng);

/// Learnable sizes of the layer types above, for closed-form counting.
inline int64_t conv_param_count(int64_t cin, int64_t cout, int64_t k, bool bias) {
  return cin * cout * k * k + (bias ? cout : 0);
}
inline int64_t batch_norm_param_count(int64_t channels) { return 2 * channels; }

}  // namespace uiu
