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

#include "uiu/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uiu/ops.hpp"

namespace uiu {

double grad_check(const std::function<Tensor()>& build_loss, std::vector<Tensor> leaves, float eps) {
  for (Tensor& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  std::vector<int64_t> pattern;
  {
    Tape tape;
    TapeScope scope(tape);
    ops::PatternScope pin(pattern, ops::PatternScope::Mode::record);
    Tensor loss = build_loss();
    tape.backward(loss);
  }
  auto evaluate = [&] {
    ops::PatternScope pin(pattern, ops::PatternScope::Mode::replay);
    const double value = build_loss().item();
    if (pin.consumed() != pattern.size()) throw std::logic_error("grad_check: loss graph changed between evaluations");
    return value;
  };

  NoGradScope no_grad;
  double worst = 0.0;
  for (Tensor& leaf : leaves) {
    std::vector<float> analytic(leaf.grad().begin(), leaf.grad().end());
    auto values = leaf.data();
    for (size_t i = 0; i < values.size(); ++i) {
      const float original = values[i];
      // Two central differences at h and 2h, extrapolated to cancel the h^2 term.
      auto central = [&](float h) {
        const float up = original + h;
        const float down = original - h;
        values[i] = up;
        const double loss_up = evaluate();
        values[i] = down;
        const double loss_down = evaluate();
        values[i] = original;
        return (loss_up - loss_down) / (static_cast<double>(up) - static_cast<double>(down));
      };
      const double numeric = (4.0 * central(eps) - central(2.0f * eps)) / 3.0;
      const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace uiu
