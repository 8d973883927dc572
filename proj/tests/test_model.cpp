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

#include <algorithm>

#include "grad_cases.hpp"
#include "test_util.hpp"
#include "uiu/grad_check.hpp"
#include "uiu/model.hpp"
#include "uiu/ops.hpp"

using namespace uiu;
using namespace uiu::testing;

namespace {

ModelParams make_model(const ModelConfig& cfg, uint64_t seed) {
  Prng rng(seed);
  return build_model(cfg, rng);
}

ModelConfig parse(const std::string& text) { return ModelConfig::from_kv(KvConfig::parse(text)); }

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

void fill(const Tensor& t, float v) { std::fill(t.data().begin(), t.data().end(), v); }

// Conv 3x3 with bias followed by batch norm: weights, bias, gamma, beta.
int64_t cbr(int64_t cin, int64_t cout) { return 9 * cin * cout + cout + 2 * cout; }

}  // namespace

TEST_CASE("tiny preset parameter count matches a hand ledger") {
  // En1 p4 3->4->8
  const int64_t en1 = cbr(3, 8) + cbr(8, 4) + 2 * cbr(4, 4) + cbr(4, 4) + 2 * cbr(8, 4) + cbr(8, 8);
  // En2 p3 8->8->16
  const int64_t en2 = cbr(8, 16) + cbr(16, 8) + cbr(8, 8) + cbr(8, 8) + cbr(16, 8) + cbr(16, 16);
  // En3 d4 16->16->16
  const int64_t en3 = 5 * cbr(16, 16) + 3 * cbr(32, 16);
  CHECK(en1 == 2208);
  CHECK(en2 == 7104);
  CHECK(en3 == 25728);

  // channel gate on C channels with r = C/4, plus the spatial gate
  auto ica = [](int64_t c) {
    const int64_t r = c / 4;
    return (c * r + r) + 2 * r + (r * c + c) + 2 * c + (c * r) + 2 * r + (9 * 2 + 1);
  };
  CHECK(ica(8) == 101);

  // De2 p3 takes upsampled En3 (16) plus the fused skip 2*16
  const int64_t proj2 = 16 * 16 + 16;
  const int64_t de2 = cbr(48, 8) + cbr(8, 8) + cbr(8, 8) + cbr(8, 8) + cbr(16, 8) + cbr(16, 8);
  // De1 p4 takes upsampled De2 (8) plus the fused skip 2*8
  const int64_t proj1 = 8 * 8 + 8;
  const int64_t de1 = cbr(24, 8) + cbr(8, 4) + 2 * cbr(4, 4) + cbr(4, 4) + 2 * cbr(8, 4) + cbr(8, 8);
  const int64_t heads = (9 * 8 + 1) + (9 * 8 + 1) + (9 * 16 + 1) + (3 + 1);
  const int64_t total = en1 + en2 + en3 + proj2 + ica(16) + de2 + proj1 + ica(8) + de1 + heads;
  CHECK(total == 47411);

  const ModelConfig cfg = ModelConfig::from_preset(Preset::tiny);
  ModelParams m = make_model(cfg, 1);
  CHECK(count_params(m) == total);
  CHECK(count_params(cfg) == total);
  int64_t summed = 0;
  for (const auto& e : m.store.entries()) {
    if (e.kind == ParamKind::weight) summed += e.tensor.numel();
  }
  CHECK(summed == total);

  SUBCASE("without the gate the skip is the raw encoder output") {
    ModelConfig plain = cfg;
    plain.ica_enabled = false;
    const int64_t de2_plain = cbr(32, 8) + cbr(8, 8) + cbr(8, 8) + cbr(8, 8) + cbr(16, 8) + cbr(16, 8);
    const int64_t de1_plain = cbr(16, 8) + cbr(8, 4) + 2 * cbr(4, 4) + cbr(4, 4) + 2 * cbr(8, 4) + cbr(8, 8);
    const int64_t expected = en1 + en2 + en3 + de2_plain + de1_plain + heads;
    CHECK(expected == 44959);
    ModelParams pm = make_model(plain, 1);
    CHECK(count_params(pm) == expected);
    CHECK(count_params(plain) == expected);
    for (const auto& e : pm.store.entries()) {
      CHECK(e.name.rfind("ica", 0) != 0);
      CHECK(e.name.rfind("proj", 0) != 0);
    }
  }
}

TEST_CASE("single conv layer count and MACs") {
  ParamStore store;
  Prng rng(3);
  Conv c = make_conv(store, "c", 3, 8, 3, 1, true, rng);
  CHECK(store.count(ParamKind::weight) == 224);
  CHECK(conv_param_count(3, 8, 3, true) == 224);
  Tensor x = random_tensor({1, 3, 10, 10}, rng);
  ops::MacCounter counter;
  Tensor y = c.forward(x);
  CHECK(y.shape() == Shape{1, 8, 10, 10});
  CHECK(counter.count() == 10 * 10 * 8 * 3 * 9);
  CHECK(counter.count() == 21600);
}

TEST_CASE("closed-form MACs equal the MACs issued by a forward pass") {
  for (Preset p : {Preset::tiny, Preset::small}) {
    for (bool ica : {true, false}) {
      ModelConfig cfg = ModelConfig::from_preset(p);
      cfg.ica_enabled = ica;
      ModelParams m = make_model(cfg, 2);
      const int64_t size = cfg.spatial_multiple() * 4;
      Prng rng(4);
      Tensor x = random_tensor({1, 3, size, size}, rng);
      ops::MacCounter counter;
      NoGradScope no_grad;
      forward(m, x, false);
      INFO("preset " << to_string(p) << " ica " << ica);
      CHECK(counter.count() == count_macs(cfg, size, size));
      CHECK(count_flops(cfg, size, size) == 2 * counter.count());
    }
  }
}

TEST_CASE("every side output and the fused map cover the input resolution") {
  for (Preset p : {Preset::tiny, Preset::small}) {
    const ModelConfig cfg = ModelConfig::from_preset(p);
    ModelParams m = make_model(cfg, 5);
    for (int64_t size : {64, 96, 128}) {
      if (size % cfg.spatial_multiple() != 0) continue;
      Prng rng(static_cast<uint64_t>(size));
      Tensor x = uniform_tensor({1, 3, size, size}, rng);
      NoGradScope no_grad;
      SideOutputs out = forward(m, x, true);
      CHECK(out.side.size() == static_cast<size_t>(cfg.num_side_outputs()));
      const auto probs = out.probabilities();
      CHECK(probs.size() == static_cast<size_t>(cfg.num_side_outputs() + 1));
      for (const Tensor& t : probs) {
        CHECK(t.shape() == Shape{1, 1, size, size});
        for (float v : t.data()) {
          REQUIRE(v > 0.0f);
          REQUIRE(v < 1.0f);
        }
      }
    }
  }
}

TEST_CASE("zeroed heads give probability one half everywhere") {
  const ModelConfig cfg = ModelConfig::from_preset(Preset::tiny);
  ModelParams m = make_model(cfg, 6);
  for (const Conv& h : m.side_heads) {
    fill(h.w, 0.0f);
    fill(h.b, 0.0f);
  }
  fill(m.fuse.w, 0.0f);
  fill(m.fuse.b, 0.0f);
  Prng rng(7);
  Tensor x = uniform_tensor({2, 3, 32, 32}, rng);
  for (bool training : {true, false}) {
    SideOutputs out = forward(m, x, training);
    for (const Tensor& t : out.probabilities()) {
      for (float v : t.data()) REQUIRE(v == 0.5f);
    }
  }
}

TEST_CASE("toggling the gate leaves encoder activations bit-identical") {
  ModelConfig with = ModelConfig::from_preset(Preset::tiny);
  ModelConfig without = with;
  without.ica_enabled = false;
  ModelParams a = make_model(with, 8), b = make_model(without, 8);
  Prng rng(9);
  Tensor x = uniform_tensor({2, 3, 32, 32}, rng);
  for (bool training : {true, false}) {
    ForwardTrace ta, tb;
    NoGradScope no_grad;
    forward(a, x, training, &ta);
    forward(b, x, training, &tb);
    REQUIRE(ta.encoder.size() == 3);
    for (size_t i = 0; i < ta.encoder.size(); ++i) CHECK(same(ta.encoder[i], tb.encoder[i]));
    for (size_t i = 0; i < ta.skips.size(); ++i) {
      CHECK(same(tb.skips[i], tb.encoder[i]));
      CHECK(ta.skips[i].shape().c == 2 * tb.skips[i].shape().c);
    }
    CHECK(max_abs_diff(ta.decoder[0], tb.decoder[0]) > 1e-3);
  }
}

TEST_CASE("gradient reaches every parameter tensor") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    ModelConfig cfg = ModelConfig::from_preset(Preset::tiny);
    cfg.ica_enabled = seed % 2 == 0;
    ModelParams m = make_model(cfg, seed);
    Prng rng(seed + 100);
    Tensor x = uniform_tensor({2, 3, 32, 32}, rng);
    Tensor y({2, 1, 32, 32});
    for (auto& v : y.data()) v = rng.next_f64() < 0.1 ? 1.0f : 0.0f;
    Tape tape;
    TapeScope scope(tape);
    SideOutputs out = forward(m, x, true);
    Tensor loss;
    for (const Tensor& logit : out.all_logits()) {
      Tensor l = ops::bce_loss(ops::sigmoid(logit), y);
      loss = loss.defined() ? ops::add(loss, l) : l;
    }
    m.store.zero_grad();
    tape.backward(loss);
    const GradientReach reach = gradient_reach(m.store);
    CHECK(reach.dead.empty());
    for (const auto& name : reach.dead) MESSAGE("no gradient: " << name);
    CHECK(reach.largest_cancelling <= 1e-5 * reach.largest);
  }
}

TEST_CASE("composed chain gradients match central differences") {
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) worst = std::max(worst, chain_grad_error(seed));
  MESSAGE("worst chain gradient error: " << worst);
  CHECK(worst < 1e-3);
}

TEST_CASE("configuration text") {
  SUBCASE("presets round trip") {
    for (Preset p : {Preset::tiny, Preset::small, Preset::full}) {
      ModelConfig cfg = ModelConfig::from_preset(p);
      cfg.gate_kind = GateKind::relu;
      CHECK(parse(cfg.to_text()) == cfg);
    }
  }
  SUBCASE("stage list and overrides") {
    const ModelConfig cfg = parse("stages = p4:4:8, p3:8:16, d4:16:16, p3:8:8, p4:4:8\nmid_ch.4 = 6\nica_enabled = false\n");
    CHECK(cfg.num_levels() == 3);
    CHECK(cfg.decoders[1].mid_ch == 6);
    CHECK(cfg.decoders[0].mid_ch == 4);
    CHECK_FALSE(cfg.ica_enabled);
    CHECK(cfg.spatial_multiple() == 4);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse("preset = tiny\nlearning_rate = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("preset = huge\n"), ConfigError);
    CHECK_THROWS_AS(parse("stages = p4:4:8, p3:8:16, p4:16:16, p3:8:8, p4:4:8\n"), ConfigError);
    CHECK_THROWS_AS(parse("stages = p4:4:8, p3:8:16, d4:16:16, p3:8:8\n"), ConfigError);
    CHECK_THROWS_AS(parse("stages = p4:4:8, p3:8:16, d4:16:16, p3:8:8, x4:4:8\n"), ConfigError);
    CHECK_THROWS_AS(parse("mid_ch.9 = 4\n"), ConfigError);
  }
}

TEST_CASE("inputs that do not fit are rejected with the padding needed") {
  const ModelConfig cfg = ModelConfig::from_preset(Preset::tiny);
  ModelParams m = make_model(cfg, 12);
  Prng rng(13);
  Tensor x = uniform_tensor({1, 3, 30, 32}, rng);
  try {
    forward(m, x, false);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("multiple of 4") != std::string::npos);
    CHECK(msg.find("pad by 2 rows and 0 columns to 32x32") != std::string::npos);
  }
  CHECK_THROWS_AS(forward(m, uniform_tensor({1, 2, 32, 32}, rng), false), ShapeError);
}

TEST_CASE("inference is deterministic and replicates single-channel input") {
  const ModelConfig cfg = ModelConfig::from_preset(Preset::tiny);
  ModelParams m = make_model(cfg, 14);
  Prng rng(15);
  Tensor gray = uniform_tensor({1, 1, 32, 32}, rng);
  Tensor a = infer(m, gray), b = infer(m, gray);
  CHECK(same(a, b));
  Tensor rgb = ops::concat_channels({gray, gray, gray});
  CHECK(same(a, infer(m, rgb)));
  ModelParams again = make_model(cfg, 14);
  CHECK(same(a, infer(again, gray)));
}
