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

#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uiu {

/// Allocates on 64-byte boundaries so vectorized kernels see the same
/// alignment, and sum in the same order, on every run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

/// Raised on any violated shape or argument precondition.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  int64_t n = 1;
  int64_t c = 1;
  int64_t h = 1;
  int64_t w = 1;

  int64_t numel() const { return n * c * h * w; }
  int64_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Rank-4 dense float tensor in N,C,H,W row-major order.
///
/// Tensor is a shared handle: copies alias the same storage, which is how
/// the tape keeps inputs alive for the backward pass. Use clone() for a
/// deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false) { return Tensor(shape, requires_grad); }
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false) { return full({1, 1, 1, 1}, value, requires_grad); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl().shape; }
  int64_t numel() const { return impl().shape.numel(); }

  // A Tensor is a handle: copies share storage, and constness of the handle
  // does not extend to the values it points at.
  std::span<float> data() const { return impl().data; }
  float* ptr() const { return impl().data.data(); }
  float& at(int64_t n, int64_t c, int64_t h, int64_t w) const;
  float item() const;

  bool requires_grad() const { return impl().requires_grad; }
  /// Turning gradients on allocates a zeroed grad buffer.
  Tensor& set_requires_grad(bool on);

  bool has_grad() const { return !impl().grad.empty(); }
  /// Allocates a zeroed grad buffer if absent.
  /// Allocates a zero gradient on first use.
  std::span<float> grad() const;
  void zero_grad() const;

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    FloatBuffer data;
    FloatBuffer grad;
    bool requires_grad = false;
  };
  Impl& impl() const;
  std::shared_ptr<Impl> impl_;
};

/// Ordered record of differentiable operations.
///
/// Ops append themselves to the tape installed by TapeScope on the current
/// thread, but only when at least one input requires a gradient. Entries are
/// appended after their inputs exist, so the vector order is a topological
/// order and backward() simply walks it in reverse.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void(const Tensor& out)> backward;
  };

  void record(std::string op, std::vector<Tensor> inputs, Tensor output,
              std::function<void(const Tensor& out)> backward);

  /// Reverse-mode sweep from a scalar loss. Intermediate grads are reset at
  /// the start of every call; leaf grads accumulate across calls.
  void backward(const Tensor& loss);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::string> op_names() const;
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Tape installed on this thread, or nullptr.
  static Tape* current();

 private:
  friend class TapeScope;
  std::vector<Entry> entries_;
};

/// Installs a tape as the recording target for the enclosing scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording for the enclosing scope.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace uiu
