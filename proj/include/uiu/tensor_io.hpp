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

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "uiu/tensor.hpp"

namespace uiu {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// UIUT tensor blob:
///   "UIUT" | u8 version=1 | u8 dtype (0=f32) | u8 rank | rank x u64 LE dims |
///   f32 LE payload, row-major.
/// Tensors are always written with rank 4. Readers accept rank 1..4 and pad
/// trailing dims with 1.
inline constexpr uint8_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

namespace le {
void put_u8(std::ostream& os, uint8_t v);
void put_u16(std::ostream& os, uint16_t v);
void put_u32(std::ostream& os, uint32_t v);
void put_u64(std::ostream& os, uint64_t v);
uint8_t get_u8(std::istream& is);
uint16_t get_u16(std::istream& is);
uint32_t get_u32(std::istream& is);
uint64_t get_u64(std::istream& is);
void get_bytes(std::istream& is, char* dst, size_t n);
}  // namespace le

}  // namespace uiu
