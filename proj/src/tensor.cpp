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

#include "uiu/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace uiu {

namespace {
thread_local Tape* g_current_tape = nullptr;

void check_shape(const Shape& s) {
  if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
    throw ShapeError("tensor dims must be >= 1, got " + s.str());
  }
}
}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  impl_->shape = shape;
  impl_->data.assign(static_cast<size_t>(shape.numel()), 0.0f);
  set_requires_grad(requires_grad);
}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  if (static_cast<int64_t>(values.size()) != shape.numel()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape.str());
  }
  impl_->shape = shape;
  impl_->data.assign(values.begin(), values.end());
  set_requires_grad(requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  Tensor t(shape, requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("access to undefined tensor");
  return *impl_;
}

float& Tensor::at(int64_t n, int64_t c, int64_t h, int64_t w) const {
  const Shape& s = impl().shape;
  return impl_->data[static_cast<size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl().requires_grad = on;
  if (on && impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
  return *this;
}

std::span<float> Tensor::grad() const {
  Impl& im = impl();
  if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0f);
  return im.grad;
}

void Tensor::zero_grad() const {
  Impl& im = impl();
  if (im.grad.empty()) {
    im.grad.assign(im.data.size(), 0.0f);
  } else {
    std::fill(im.grad.begin(), im.grad.end(), 0.0f);
  }
}

Tensor Tensor::clone() const {
  Tensor t(shape(), std::vector<float>(impl_->data.begin(), impl_->data.end()), false);
  t.impl_->requires_grad = impl_->requires_grad;
  t.impl_->grad = impl_->grad;
  return t;
}

void Tape::record(std::string op, std::vector<Tensor> inputs, Tensor output,
                  std::function<void(const Tensor& out)> backward) {
  entries_.push_back({std::move(op), std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() requires a scalar loss");
  }
  auto last = std::find_if(entries_.rbegin(), entries_.rend(),
                           [&](const Entry& e) { return e.output.same_storage(loss); });
  if (last == entries_.rend()) {
    throw std::logic_error("backward(): loss was not produced on this tape");
  }
  for (auto it = last; it != entries_.rend(); ++it) it->output.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] = 1.0f;
  for (auto it = last; it != entries_.rend(); ++it) it->backward(it->output);
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.push_back(e.op);
  return names;
}

Tape* Tape::current() { return g_current_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }
TapeScope::~TapeScope() { g_current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_current_tape) { g_current_tape = nullptr; }
NoGradScope::~NoGradScope() { g_current_tape = previous_; }

}  // namespace uiu
