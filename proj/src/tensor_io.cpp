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

#include "uiu/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace uiu {

namespace le {

namespace {
template <class T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char buf[sizeof(T)];
  get_bytes(is, reinterpret_cast<char*>(buf), sizeof(T));
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}
}  // namespace

void put_u8(std::ostream& os, uint8_t v) { put(os, v); }
void put_u16(std::ostream& os, uint16_t v) { put(os, v); }
void put_u32(std::ostream& os, uint32_t v) { put(os, v); }
void put_u64(std::ostream& os, uint64_t v) { put(os, v); }
uint8_t get_u8(std::istream& is) { return get<uint8_t>(is); }
uint16_t get_u16(std::istream& is) { return get<uint16_t>(is); }
uint32_t get_u32(std::istream& is) { return get<uint32_t>(is); }
uint64_t get_u64(std::istream& is) { return get<uint64_t>(is); }

void get_bytes(std::istream& is, char* dst, size_t n) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n) throw FormatError("unexpected end of file");
}

}  // namespace le

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write("UIUT", 4);
  le::put_u8(os, kTensorFormatVersion);
  le::put_u8(os, 0);
  le::put_u8(os, 4);
  const Shape& s = t.shape();
  for (int64_t d : {s.n, s.c, s.h, s.w}) le::put_u64(os, static_cast<uint64_t>(d));
  for (float v : t.data()) le::put_u32(os, std::bit_cast<uint32_t>(v));
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  le::get_bytes(is, magic, 4);
  if (std::memcmp(magic, "UIUT", 4) != 0) throw FormatError("bad tensor magic, expected UIUT");
  const uint8_t version = le::get_u8(is);
  if (version != kTensorFormatVersion) {
    throw FormatError("unsupported tensor format version " + std::to_string(version));
  }
  const uint8_t dtype = le::get_u8(is);
  if (dtype != 0) throw FormatError("unsupported tensor dtype " + std::to_string(dtype));
  const uint8_t rank = le::get_u8(is);
  if (rank < 1 || rank > 4) throw FormatError("unsupported tensor rank " + std::to_string(rank));
  int64_t dims[4] = {1, 1, 1, 1};
  constexpr uint64_t kMaxDim = uint64_t{1} << 32;
  for (int i = 0; i < rank; ++i) {
    const uint64_t d = le::get_u64(is);
    if (d == 0 || d > kMaxDim) throw FormatError("invalid tensor dimension " + std::to_string(d));
    dims[i] = static_cast<int64_t>(d);
  }
  const Shape shape{dims[0], dims[1], dims[2], dims[3]};
  std::vector<char> raw(static_cast<size_t>(shape.numel()) * 4);
  le::get_bytes(is, raw.data(), raw.size());
  std::vector<float> values(static_cast<size_t>(shape.numel()));
  for (size_t i = 0; i < values.size(); ++i) {
    uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<uint32_t>(static_cast<unsigned char>(raw[i * 4 + b])) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return Tensor(shape, std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace uiu
