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

#include <functional>
#include <vector>

#include "uiu/tensor.hpp"

namespace uiu {

/// Compares tape gradients against central differences.
///
/// `build_loss` must construct a scalar loss from `leaves` (captured by the
/// caller) and may be called many times. Returns the maximum over every leaf
/// element of |analytic - numeric| / max(1, |numeric|). Differences are
/// taken in double against the actually representable f32 step, with every
/// kink pinned to the branch taken at the unperturbed point.
/// Leaf grad buffers are left holding the analytic gradient.
double grad_check(const std::function<Tensor()>& build_loss, std::vector<Tensor> leaves, float eps);

}  // namespace uiu
