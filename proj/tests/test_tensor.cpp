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

#include <doctest.h>

#include <cstring>
#include <limits>
#include <sstream>

#include "test_util.hpp"
#include "uiu/grad_check.hpp"
#include "uiu/tensor_io.hpp"

using namespace uiu;
using uiu::testing::random_tensor;

TEST_CASE("tensor storage and handles") {
  Tensor t({2, 3, 4, 5});
  CHECK(t.numel() == 120);
  CHECK(t.data().size() == 120);
  for (float v : t.data()) CHECK(v == 0.0f);
  CHECK_FALSE(t.has_grad());

  t.at(1, 2, 3, 4) = 7.0f;
  CHECK(t.data().back() == 7.0f);
  t.at(0, 1, 0, 0) = 3.0f;
  CHECK(t.data()[20] == 3.0f);

  Tensor alias = t;
  CHECK(alias.same_storage(t));
  Tensor copy = t.clone();
  CHECK_FALSE(copy.same_storage(t));
  copy.data()[0] = 1.0f;
  CHECK(t.data()[0] == 0.0f);

  t.set_requires_grad(true);
  REQUIRE(t.has_grad());
  for (float g : t.grad()) CHECK(g == 0.0f);
  t.grad()[3] = 2.0f;
  t.zero_grad();
  for (float g : t.grad()) CHECK(g == 0.0f);
}

TEST_CASE("tensor rejects invalid shapes and sizes") {
  CHECK_THROWS_AS(Tensor({1, 0, 2, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  CHECK_THROWS_AS(Tensor({1, 1, 2, 2}).item(), ShapeError);
  CHECK(Tensor::scalar(4.5f).item() == 4.5f);
}

TEST_CASE("prng is splitmix64") {
  // Reference outputs of splitmix64 seeded with 1234567.
  Prng rng(1234567);
  CHECK(rng.next_u64() == 6457827717110365317ULL);
  CHECK(rng.next_u64() == 3203168211198807973ULL);
  CHECK(rng.next_u64() == 9817491932198370423ULL);

  Prng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Prng c(9);
  for (int i = 0; i < 10000; ++i) {
    const float f = c.next_f32();
    CHECK(f >= 0.0f);
    CHECK(f < 1.0f);
  }
  CHECK(Prng::derive(5, 0) != Prng::derive(5, 1));
  CHECK(Prng::derive(5, 0) != Prng::derive(6, 0));
}

TEST_CASE("prng normal has unit moments") {
  Prng rng(3);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(std::fabs(sq / n - 1.0) < 0.02);
}

TEST_CASE("backward basics") {
  Prng rng(1);
  Tensor x = random_tensor({2, 2, 3, 3}, rng).set_requires_grad(true);

  SUBCASE("sum gives ones") {
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = ops::sum(x);
    }
    tape.backward(loss);
    for (float g : x.grad()) CHECK(g == 1.0f);
  }
  SUBCASE("dead relu region gives zeros") {
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = ops::sum(ops::relu(ops::add_scalar(ops::scale(ops::abs(x), -1.0f), -1.0f)));
    }
    tape.backward(loss);
    for (float g : x.grad()) CHECK(g == 0.0f);
  }
  SUBCASE("repeated backward accumulates") {
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = ops::sum(ops::scale(x, 3.0f));
    }
    tape.backward(loss);
    tape.backward(loss);
    for (float g : x.grad()) CHECK(g == 6.0f);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape tape;
    Tensor y;
    {
      TapeScope scope(tape);
      y = ops::scale(x, 2.0f);
    }
    CHECK_THROWS(tape.backward(y));
  }
  SUBCASE("linearity of backward") {
    Tensor r1 = random_tensor(x.shape(), rng), r2 = random_tensor(x.shape(), rng);
    auto grad_of = [&](bool first, bool second) {
      x.zero_grad();
      Tape tape;
      Tensor loss;
      {
        TapeScope scope(tape);
        Tensor y = ops::sigmoid(x);
        Tensor l1 = ops::sum(ops::mul(y, r1));
        Tensor l2 = ops::sum(ops::mul(ops::mul(y, y), r2));
        loss = first && second ? ops::add(l1, l2) : first ? l1 : l2;
      }
      tape.backward(loss);
      return std::vector<float>(x.grad().begin(), x.grad().end());
    };
    const auto g1 = grad_of(true, false), g2 = grad_of(false, true), g12 = grad_of(true, true);
    for (size_t i = 0; i < g12.size(); ++i) CHECK(g12[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-6));
  }
}

TEST_CASE("tape records only when a grad is wanted") {
  Prng rng(2);
  Tensor a = random_tensor({1, 1, 2, 2}, rng);
  Tensor b = random_tensor({1, 1, 2, 2}, rng).set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    ops::add(a, a);
    CHECK(tape.size() == 0);
    ops::add(a, b);
    CHECK(tape.size() == 1);
    {
      NoGradScope off;
      ops::add(a, b);
    }
    CHECK(tape.size() == 1);
  }
  ops::add(a, b);
  CHECK(tape.size() == 1);
  CHECK(tape.op_names() == std::vector<std::string>{"add"});
}

TEST_CASE("tape entries are topologically ordered") {
  Prng rng(3);
  Tensor x = random_tensor({1, 2, 4, 4}, rng).set_requires_grad(true);
  Tensor w = random_tensor({2, 2, 3, 3}, rng).set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    ops::sum(ops::max_pool2d(ops::relu(ops::conv2d(x, w, Tensor(), 1, 1)), 2, 2));
  }
  const auto& entries = tape.entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    for (const Tensor& in : entries[i].inputs) {
      if (!in.defined()) continue;
      for (size_t j = i; j < entries.size(); ++j) CHECK_FALSE(entries[j].output.same_storage(in));
    }
  }
}

TEST_CASE("grad_check of a linear loss is exact up to rounding") {
  Prng rng(4);
  Tensor x = random_tensor({1, 2, 3, 3}, rng);
  const double err = grad_check([&] { return ops::sum(x); }, {x}, 1e-2f);
  CHECK(err < 1e-5);
}

TEST_CASE("UIUT round trip is lossless") {
  Prng rng(5);
  Tensor t = random_tensor({2, 3, 4, 5}, rng);
  t.data()[0] = -0.0f;
  t.data()[1] = std::numeric_limits<float>::denorm_min();
  t.data()[2] = std::numeric_limits<float>::max();
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 4 + 3 + 4 * 8 + 120 * 4);
  CHECK(bytes.substr(0, 4) == "UIUT");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 4);
  CHECK(static_cast<unsigned char>(bytes[7]) == 2);  // n, little-endian u64
  CHECK(static_cast<unsigned char>(bytes[15]) == 3);

  Tensor back = read_tensor(ss);
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.ptr(), t.ptr(), 120 * sizeof(float)) == 0);

  std::stringstream again;
  write_tensor(again, back);
  CHECK(again.str() == bytes);
}

TEST_CASE("UIUT payload bytes are little-endian f32") {
  std::stringstream ss;
  write_tensor(ss, Tensor({1, 1, 1, 1}, std::vector<float>{1.0f}));
  const std::string b = ss.str();
  CHECK(b.substr(b.size() - 4) == std::string("\x00\x00\x80\x3f", 4));
}

TEST_CASE("UIUT reader accepts lower ranks and rejects corrupt input") {
  std::stringstream ss;
  ss.write("UIUT", 4);
  le::put_u8(ss, 1);
  le::put_u8(ss, 0);
  le::put_u8(ss, 2);
  le::put_u64(ss, 2);
  le::put_u64(ss, 3);
  for (int i = 0; i < 6; ++i) {
    const float v = static_cast<float>(i);
    ss.write(reinterpret_cast<const char*>(&v), 4);
  }
  Tensor t = read_tensor(ss);
  CHECK(t.shape() == Shape{2, 3, 1, 1});
  CHECK(t.data()[5] == 5.0f);

  std::stringstream bad_magic("UIUX\x01\x00\x04");
  CHECK_THROWS_AS(read_tensor(bad_magic), FormatError);

  std::stringstream full;
  write_tensor(full, Tensor({1, 1, 2, 2}));
  const std::string bytes = full.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(read_tensor(truncated), FormatError);

  std::string wrong_version = bytes;
  wrong_version[4] = 2;
  std::stringstream wv(wrong_version);
  CHECK_THROWS_AS(read_tensor(wv), FormatError);

  std::string wrong_dtype = bytes;
  wrong_dtype[5] = 1;
  std::stringstream wd(wrong_dtype);
  CHECK_THROWS_AS(read_tensor(wd), FormatError);
}

TEST_CASE("UIUT file round trip") {
  Prng rng(6);
  const auto dir = uiu::testing::scratch_dir("uiut");
  Tensor t = random_tensor({1, 2, 3, 4}, rng);
  save_tensor(dir / "a.uiut", t);
  Tensor back = load_tensor(dir / "a.uiut");
  save_tensor(dir / "b.uiut", back);
  CHECK(uiu::testing::read_file(dir / "a.uiut") == uiu::testing::read_file(dir / "b.uiut"));
  CHECK_THROWS(load_tensor(dir / "missing.uiut"));
}
