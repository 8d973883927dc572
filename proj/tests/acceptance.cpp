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

// One PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grad_cases.hpp"
#include "test_util.hpp"
#include "uiu/checkpoint.hpp"
#include "uiu/data.hpp"
#include "uiu/metrics.hpp"
#include "uiu/model.hpp"
#include "uiu/tensor_io.hpp"
#include "uiu/train.hpp"

using namespace uiu;
using namespace uiu::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects failed expectations for one criterion.
struct Verdict {
  std::vector<std::string> failures;
  std::ostringstream note;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

void fill(const Tensor& t, float v) { std::fill(t.data().begin(), t.data().end(), v); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + UIUNET_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

DatasetTemplate overfit_template() { return DatasetTemplate{}; }

// Eval-mode fused probabilities over a dataset.
std::vector<Tensor> predict(const ModelParams& m, const std::vector<Sample>& data) {
  std::vector<Tensor> out;
  for (const Sample& s : data) out.push_back(infer(m, s.image));
  return out;
}

std::vector<Tensor> masks_of(const std::vector<Sample>& data) {
  std::vector<Tensor> out;
  for (const Sample& s : data) out.push_back(s.mask);
  return out;
}

std::vector<Tensor> binarized(const std::vector<Tensor>& scores, float thr) {
  std::vector<Tensor> out;
  for (const Tensor& s : scores) out.push_back(binarize(s, thr));
  return out;
}

void gradient_suite(Verdict& v) {
  const auto t0 = Clock::now();
  double worst_op = 0.0;
  for (const GradCase& c : op_grad_cases()) {
    for (int seed = 0; seed < 20; ++seed) {
      Prng rng = grad_case_rng(seed);
      const double err = c.run(rng);
      worst_op = std::max(worst_op, err);
      v.expect(err < 1e-3, std::string(c.name) + " seed " + std::to_string(seed));
    }
  }
  double worst_chain = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const double err = chain_grad_error(seed);
    worst_chain = std::max(worst_chain, err);
    v.expect(err < 1e-3, "composed chain seed " + std::to_string(seed));
  }
  const double elapsed = seconds_since(t0);
  v.expect(elapsed < 120.0, "runtime over 2 min");
  v.note << op_grad_cases().size() << " op cases x 20 seeds worst " << worst_op << ", composed chain x 20 seeds worst "
         << worst_chain << ", " << elapsed << " s";
}

void resolution_suite(Verdict& v) {
  int checked = 0;
  for (Preset p : {Preset::tiny, Preset::small}) {
    const ModelConfig cfg = ModelConfig::from_preset(p);
    Prng init(11);
    ModelParams m = build_model(cfg, init);
    for (int64_t size : {64, 96, 128}) {
      Prng rng(static_cast<uint64_t>(size));
      Tensor x = uniform_tensor({1, 3, size, size}, rng);
      NoGradScope no_grad;
      for (bool training : {true, false}) {
        const auto logits = forward(m, x, training).all_logits();
        const std::string where = to_string(p) + " " + std::to_string(size) + (training ? " train" : " eval");
        v.expect(logits.size() == static_cast<size_t>(cfg.num_side_outputs() + 1), where + ": output count");
        for (const Tensor& t : logits) v.expect(t.shape() == Shape{1, 1, size, size}, where + ": output shape");
        ++checked;
      }
    }
  }
  v.note << checked << " forward passes, every side and fused map at input H,W";
}

void residual_identity(Verdict& v) {
  const ModelConfig cfg = ModelConfig::from_preset(Preset::tiny);
  std::vector<RsuSpec> specs;
  for (int l = 1; l <= cfg.num_levels(); ++l) specs.push_back(cfg.encoder_spec(l));
  for (int l = 1; l < cfg.num_levels(); ++l) specs.push_back(cfg.decoder_spec(l));
  int blocks = 0;
  for (size_t i = 0; i < specs.size(); ++i) {
    ParamStore store;
    Prng rng(20 + i);
    RsuParams block = build_rsu(specs[i], rng, store, "rsu");
    fill(block.top().conv.w, 0.0f);
    fill(block.top().bn.gamma, 0.0f);
    Tensor x = random_tensor({2, specs[i].in_ch, 32, 32}, rng);
    for (bool training : {true, false}) {
      Tensor fx;
      const Tensor y = rsu_forward(block, x, training, &fx);
      v.expect(same(y, fx), "block " + std::to_string(i) + (training ? " train" : " eval"));
    }
    ++blocks;
  }
  v.note << blocks << " blocks of the tiny preset in both modes, output == f(x) bit for bit";
}

void ica_degeneracies(Verdict& v) {
  double worst_open = 0.0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    ParamStore store;
    Prng rng(seed + 30);
    IcaParams p = build_ica(4, rng, store, "ica");
    Tensor f_h = random_tensor({1, 4, 8, 8}, rng), f_l = random_tensor({1, 4, 8, 8}, rng);

    fill(p.bn2.gamma, 0.0f);
    fill(p.bn2.beta, 200.0f);
    fill(p.c3.w, 0.0f);
    fill(p.c3.b, 200.0f);
    for (bool training : {true, false}) {
      const IcaOutput out = ica_forward(f_h, f_l, p, GateKind::sigmoid, training);
      const double d = max_abs_diff(out.fused, ops::concat_channels({f_l, f_h}));
      worst_open = std::max(worst_open, d);
      v.expect(out.fused.shape() == Shape{1, 8, 8, 8} && d <= 1e-6, "forced open, seed " + std::to_string(seed));
    }

    fill(p.bn2.beta, -200.0f);
    Tensor gate;
    const Tensor f_ca = channel_attention(f_h, f_l, p, true, &gate);
    for (float x : f_ca.data()) v.expect(x == 0.0f, "forced closed, seed " + std::to_string(seed));

    // Random gates against loop oracles for both broadcasts.
    IcaParams r = build_ica(4, rng, store, "ica_r");
    Tensor a, s;
    const Tensor ca = channel_attention(f_h, f_l, r, true, &a);
    const Tensor ica = spatial_attention(ca, f_h, r, GateKind::sigmoid, true, &s);
    v.expect(a.shape() == Shape{1, 4, 1, 1} && s.shape() == Shape{1, 1, 8, 8}, "gate shapes");
    for (int64_t c = 0; c < 4; ++c)
      for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = 0; j < 8; ++j) {
          v.expect(ca.at(0, c, i, j) == a.at(0, c, 0, 0) * f_l.at(0, c, i, j), "channel broadcast");
          v.expect(ica.at(0, c, i, j) == s.at(0, 0, i, j) * f_h.at(0, c, i, j), "spatial broadcast");
        }
  }
  v.note << "forced open max |diff| " << worst_open << ", forced closed exact zeros, loop oracles on 1x4x8x8";
}

Tensor random_mask(Prng& rng, double density) {
  Tensor t({1, 1, 16, 16});
  for (float& x : t.data()) x = rng.next_f64() < density ? 1.0f : 0.0f;
  return t;
}

void metric_oracles(Verdict& v) {
  Prng rng(40);
  std::vector<Tensor> scores, truths;
  for (int i = 0; i < 50; ++i) {
    scores.push_back(uniform_tensor({1, 1, 16, 16}, rng));
    truths.push_back(random_mask(rng, 0.02 + 0.005 * i));
  }
  if (truths[0].data()[0] == 0.0f) truths[0].data()[0] = 1.0f;

  // brute force at the default threshold
  uint64_t tp = 0, t = 0, p = 0;
  double mean = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    uint64_t a = 0, b = 0, c = 0;
    for (size_t k = 0; k < scores[i].data().size(); ++k) {
      const bool pr = scores[i].data()[k] >= 0.5f, gt = truths[i].data()[k] >= 0.5f;
      a += pr && gt;
      b += gt;
      c += pr;
    }
    const ConfusionCounts got = confusion(scores[i], truths[i]);
    v.expect(got.tp == a && got.truth() == b && got.predicted() == c, "confusion counts, pair " + std::to_string(i));
    tp += a;
    t += b;
    p += c;
    mean += b + c - a ? static_cast<double>(a) / static_cast<double>(b + c - a) : 1.0;
  }
  mean /= static_cast<double>(scores.size());
  const auto bin = binarized(scores, 0.5f);
  const double iou = iou_dataset(bin, truths), want = static_cast<double>(tp) / static_cast<double>(t + p - tp);
  v.expect(std::fabs(iou - want) <= 1e-9, "iou_dataset");
  v.expect(std::fabs(niou(bin, truths) - mean) <= 1e-9, "niou");

  const RocCurve curve = roc(scores, truths, 51);
  for (const RocPoint& pt : curve.points) {
    uint64_t ptp = 0, pfp = 0, pos = 0, neg = 0;
    for (size_t i = 0; i < scores.size(); ++i)
      for (size_t k = 0; k < scores[i].data().size(); ++k) {
        const bool pr = scores[i].data()[k] >= pt.threshold, gt = truths[i].data()[k] >= 0.5f;
        ptp += pr && gt;
        pfp += pr && !gt;
        pos += gt;
        neg += !gt;
      }
    v.expect(pt.counts.tp == ptp && pt.counts.fp == pfp && pt.counts.truth() == pos &&
                 pt.counts.tn == neg - pfp,
             "roc counts at " + std::to_string(pt.threshold));
    v.expect(std::fabs(pt.tpr - static_cast<double>(ptp) / static_cast<double>(pos)) <= 1e-9, "roc tpr");
    v.expect(std::fabs(pt.fpr - static_cast<double>(pfp) / static_cast<double>(neg)) <= 1e-9, "roc fpr");
  }

  const Tensor hand_truth({1, 1, 4, 4}, {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const Tensor hand_pred({1, 1, 4, 4}, {1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  const Tensor hp[] = {hand_pred}, ht[] = {hand_truth};
  v.expect(iou_dataset(hp, ht) == 0.5 && niou(hp, ht) == 0.5, "hand case 3/(4+5-3)");
  v.note << "50 pairs, IoU " << iou << ", " << curve.points.size() << " ROC points, hand case 0.5";
}

void roc_properties(Verdict& v) {
  Prng rng(50);
  int curves = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> scores, truths;
    for (int i = 0; i < 3; ++i) {
      scores.push_back(uniform_tensor({1, 1, 16, 16}, rng));
      truths.push_back(random_mask(rng, 0.1));
    }
    for (FprMode mode : {FprMode::standard, FprMode::paper_literal}) {
      const RocCurve c = roc(scores, truths, 33, mode);
      double prev = -1.0;
      for (const RocPoint& p : c.points) {
        v.expect(p.tpr >= prev, "TPR not monotone");
        prev = p.tpr;
        v.expect(p.fpr_standard >= 0.0 && p.fpr_standard <= 1.0, "standard FPR outside [0,1]");
        if (mode == FprMode::standard) v.expect(p.fpr == p.fpr_standard, "standard mode FPR");
      }
      ++curves;
    }
    const RocCurve perfect = roc(truths, truths, 33);
    v.expect(std::fabs(perfect.auc - 1.0) <= 1e-9, "perfect scorer AUC");
  }
  v.note << curves << " curves, perfect scorer AUC 1";
}

struct OverfitRun {
  double iou_eval = 0.0;
  double niou_eval = 0.0;
  double iou_train = 0.0;  // fused map in training mode, batch statistics
  double loss_first = 0.0;
  double loss_final = 0.0;  // mean over the last epoch
  double loss_at_50 = 0.0;
  int64_t steps = 0;
};

OverfitRun overfit(const std::vector<Sample>& data, bool ica, uint64_t seed) {
  ModelConfig mcfg = ModelConfig::from_preset(Preset::tiny);
  mcfg.ica_enabled = ica;
  Prng init(seed);
  ModelParams m = build_model(mcfg, init);
  TrainConfig tcfg;
  tcfg.max_steps = 300;
  tcfg.seed = seed;
  const TrainResult r = train_loop(m, data, tcfg);

  OverfitRun out;
  out.steps = static_cast<int64_t>(r.steps.size());
  out.loss_first = r.steps.front().loss;
  out.loss_final = r.epoch_loss.back();
  out.loss_at_50 = r.steps[std::min<size_t>(49, r.steps.size() - 1)].loss;
  const auto truths = masks_of(data);
  const auto bin = binarized(predict(m, data), 0.5f);
  out.iou_eval = iou_dataset(bin, truths);
  out.niou_eval = niou(bin, truths);

  std::vector<const Sample*> all;
  for (const Sample& s : data) all.push_back(&s);
  NoGradScope no_grad;
  const Tensor fused = ops::sigmoid(forward(m, stack_images(all), true).fused);
  const Tensor t[] = {stack_masks(all)}, p[] = {binarize(fused, 0.5f)};
  out.iou_train = iou_dataset(p, t);
  return out;
}

void overfit_trainability(Verdict& v) {
  const auto t0 = Clock::now();
  int passed = 0;
  v.note << "tiny preset, 8 scenes of 64x64, Adam defaults, eval-mode IoU at 0.5 on the training set";
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = gen_dataset(8, overfit_template(), seed);
    const OverfitRun r = overfit(data, true, seed);
    const bool ok = r.iou_eval >= 0.8 && r.loss_final < 0.1 * r.loss_first;
    passed += ok;
    v.note << "\n    seed " << seed << ": IoU " << r.iou_eval << " (batch-stat " << r.iou_train << "), loss "
           << r.loss_first << " -> " << r.loss_final << " in " << r.steps << " steps"
           << (r.loss_at_50 < r.loss_first ? ", decreasing over the first 50" : ", not decreasing over the first 50")
           << (ok ? "" : "  [miss]");
  }
  const double elapsed = seconds_since(t0);
  v.expect(passed >= 4, std::to_string(passed) + "/5 seeds reached IoU 0.8 and a tenfold loss drop");
  v.expect(elapsed < 600.0, "runtime over 10 min");
  v.note << "\n    " << passed << "/5 seeds, " << elapsed << " s";
}

void ablation(Verdict& v, const fs::path& report) {
  const auto data = gen_dataset(8, overfit_template(), 1);
  ModelConfig with = ModelConfig::from_preset(Preset::tiny), without = with;
  without.ica_enabled = false;
  Prng ra(7), rb(7);
  ModelParams a = build_model(with, ra), b = build_model(without, rb);
  std::vector<const Sample*> all;
  for (const Sample& s : data) all.push_back(&s);
  const Tensor x = stack_images(all);
  for (bool training : {true, false}) {
    ForwardTrace ta, tb;
    NoGradScope no_grad;
    forward(a, x, training, &ta);
    forward(b, x, training, &tb);
    for (size_t i = 0; i < ta.encoder.size(); ++i) v.expect(same(ta.encoder[i], tb.encoder[i]), "encoder level differs");
    for (size_t i = 0; i < ta.decoder.size(); ++i) {
      v.expect(ta.decoder[i].shape() == tb.decoder[i].shape() && max_abs_diff(ta.decoder[i], tb.decoder[i]) > 0.0,
               "decoder unchanged");
    }
  }

  const OverfitRun on = overfit(data, true, 1), off = overfit(data, false, 1);
  fs::create_directories(report.parent_path().empty() ? fs::path(".") : report.parent_path());
  std::ofstream out(report);
  out << "config,IoU,nIoU\n";
  out << "with_ica," << on.iou_eval << "," << on.niou_eval << "\n";
  out << "without_ica," << off.iou_eval << "," << off.niou_eval << "\n";
  v.expect(static_cast<bool>(out), "cannot write " + report.string());
  v.note << "encoders bit-identical, decoders differ; with_ica IoU " << on.iou_eval << " nIoU " << on.niou_eval
         << ", without_ica IoU " << off.iou_eval << " nIoU " << off.niou_eval << " -> " << report.string();
}

void determinism(Verdict& v) {
  const fs::path dir = scratch_dir("acceptance_determinism");
  const fs::path data = dir / "data";
  v.expect(run_cli("gen-data --out " + q(data) + " --n 8 --size 32 --seed 4 --max-targets 2") == 0,
           "gen-data");
  std::ofstream(dir / "model.cfg") << "preset = tiny\n";
  std::ofstream(dir / "train.cfg") << "batch_size = 3\nmax_steps = 20\nlr = 0.005\nseed = 6\n";
  std::vector<std::string> curves, ckpts;
  for (int run = 0; run < 2; ++run) {
    const fs::path ckpt = dir / ("run" + std::to_string(run) + ".ckpt");
    const fs::path csv = dir / ("run" + std::to_string(run) + ".csv");
    v.expect(run_cli("train --quiet --data " + q(data) + " --model-cfg " + q(dir / "model.cfg") + " --train-cfg " +
                     q(dir / "train.cfg") + " --out " + q(ckpt) + " --loss-csv " + q(csv)) == 0,
             "train run " + std::to_string(run));
    curves.push_back(read_file(csv));
    ckpts.push_back(read_file(ckpt));
  }
  v.expect(!curves[0].empty() && curves[0] == curves[1], "loss CSVs differ");
  v.expect(ckpts[0] == ckpts[1], "checkpoints differ");

  const Checkpoint c = load_checkpoint(dir / "run0.ckpt");
  save_checkpoint(dir / "resaved.ckpt", c.model, c.train_cfg, c.adam);
  v.expect(read_file(dir / "resaved.ckpt") == ckpts[0], "checkpoint save-load-save");

  Prng rng(60);
  Tensor t = random_tensor({2, 3, 5, 7}, rng, 1e3f);
  t.data()[0] = -0.0f;
  t.data()[1] = std::numeric_limits<float>::denorm_min();
  t.data()[2] = std::numeric_limits<float>::infinity();
  save_tensor(dir / "t.uiut", t);
  const Tensor back = load_tensor(dir / "t.uiut");
  v.expect(back.shape() == t.shape() &&
               std::memcmp(back.data().data(), t.data().data(), t.data().size() * sizeof(float)) == 0,
           "UIUT round trip");

  Tensor img({1, 1, 16, 16});
  for (size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<float>(i % 256) / 255.0f;
  save_pgm(img, dir / "g.pgm");
  v.expect(same(load_pgm(dir / "g.pgm"), img), "PGM round trip");
  for (const auto& e : fs::directory_iterator(data)) {
    if (e.path().extension() != ".pgm") continue;
    save_pgm(load_pgm(e.path()), dir / "again.pgm");
    v.expect(read_file(dir / "again.pgm") == read_file(e.path()), "PGM bytes " + e.path().filename().string());
  }
  v.note << "two CLI runs give identical loss CSVs and checkpoints; save-load-save, UIUT and PGM round trips exact";
}

void counting(Verdict& v) {
  auto cbr = [](int64_t cin, int64_t cout) { return 9 * cin * cout + cout + 2 * cout; };
  auto ica = [](int64_t c) {
    const int64_t r = c / 4;
    return (c * r + r) + 2 * r + (r * c + c) + 2 * c + (c * r) + 2 * r + (9 * 2 + 1);
  };
  const int64_t en1 = cbr(3, 8) + cbr(8, 4) + 2 * cbr(4, 4) + cbr(4, 4) + 2 * cbr(8, 4) + cbr(8, 8);
  const int64_t en2 = cbr(8, 16) + cbr(16, 8) + cbr(8, 8) + cbr(8, 8) + cbr(16, 8) + cbr(16, 16);
  const int64_t en3 = 5 * cbr(16, 16) + 3 * cbr(32, 16);
  const int64_t de2 = (16 * 16 + 16) + ica(16) + cbr(48, 8) + 3 * cbr(8, 8) + 2 * cbr(16, 8);
  const int64_t de1 = (8 * 8 + 8) + ica(8) + cbr(24, 8) + cbr(8, 4) + 3 * cbr(4, 4) + 2 * cbr(8, 4) + cbr(8, 8);
  const int64_t heads = 2 * (9 * 8 + 1) + (9 * 16 + 1) + (3 + 1);
  const int64_t ledger = en1 + en2 + en3 + de2 + de1 + heads;
  const ModelConfig tiny = ModelConfig::from_preset(Preset::tiny);
  Prng rng(70);
  ModelParams m = build_model(tiny, rng);
  v.expect(ledger == 47411, "hand ledger arithmetic");
  v.expect(count_params(m) == ledger && count_params(tiny) == ledger, "tiny count_params");

  ParamStore store;
  Conv conv = make_conv(store, "c", 3, 8, 3, 1, true, rng);
  const int64_t closed = 10 * 10 * 8 * 3 * 9;
  int64_t issued = 0;
  {
    ops::MacCounter counter;
    NoGradScope no_grad;
    conv.forward(random_tensor({1, 3, 10, 10}, rng));
    issued = counter.count();
  }
  v.expect(issued == closed && closed == 21600, "single conv MACs");

  int64_t model_macs = 0;
  {
    ops::MacCounter counter;
    NoGradScope no_grad;
    forward(m, random_tensor({1, 3, 64, 64}, rng), false);
    model_macs = counter.count();
  }
  v.expect(model_macs == count_macs(tiny, 64, 64), "tiny model MACs");

  const ModelConfig full = ModelConfig::from_preset(Preset::full);
  char line[256];
  std::snprintf(line, sizeof line, "full preset at 320x320: %.2fM params, %.2fG MACs (%.2fG FLOPs); reference 50.54M / 33.64G",
                static_cast<double>(count_params(full)) / 1e6, static_cast<double>(count_macs(full, 320, 320)) / 1e9,
                static_cast<double>(count_flops(full, 320, 320)) / 1e9);
  v.note << "tiny " << ledger << " params, conv 3->8 3x3 on 10x10 = " << closed << " MACs, tiny 64x64 = "
         << model_macs << " MACs\n    " << line;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string report = "ablation_report.csv";
  std::vector<int> only;
  app.add_option("--report", report, "Ablation report CSV")->capture_default_str();
  app.add_option("--only", only, "Run just these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
      {"gradient suite", gradient_suite},
      {"resolution maintenance", resolution_suite},
      {"residual identity", residual_identity},
      {"attention degeneracies", ica_degeneracies},
      {"metric oracle equivalence", metric_oracles},
      {"ROC properties", roc_properties},
      {"overfit trainability", overfit_trainability},
      {"ablation harness", [&](Verdict& v) { ablation(v, report); }},
      {"determinism and persistence", determinism},
      {"counting", counting},
  };

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(v);
    } catch (const std::exception& e) {
      v.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = v.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << n << ": " << criteria[i].first << " ("
              << seconds_since(t0) << " s)\n    " << v.note.str() << "\n";
    for (size_t k = 0; k < std::min<size_t>(v.failures.size(), 5); ++k) std::cout << "    failed: " << v.failures[k] << "\n";
    if (v.failures.size() > 5) std::cout << "    ... " << v.failures.size() - 5 << " more\n";
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
