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

#include <cmath>
#include <cstdint>

namespace uiu {

/// splitmix64 generator. The algorithm is fixed so that weight init and
/// scene generation agree bit-for-bit everywhere.
class Prng {
 public:
  explicit Prng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    return mix(z);
  }

  /// Uniform in [0,1) with 24 random mantissa bits.
  float next_f32() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  /// Uniform in [0,1) with 53 random mantissa bits.
  double next_f64() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_f64(); }

  /// Uniform integer in [lo, hi], inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  /// Standard normal via Box-Muller; one draw per call, no cached pair.
  double normal() {
    const double u1 = 1.0 - next_f64();  // (0,1]
    const double u2 = next_f64();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  uint64_t state() const { return state_; }

  /// The splitmix64 finalizer, also used to derive child seeds.
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Seed for stream `index` of a family keyed on `seed`.
  static uint64_t derive(uint64_t seed, uint64_t index) {
    return mix(seed ^ mix(index + 0x9E3779B97F4A7C15ULL));
  }

 private:
  uint64_t state_;
};

}  // namespace uiu
