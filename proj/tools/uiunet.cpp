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

// uiunet: data generation, training, inference and evaluation front end.
//
// Summary lines on stdout are `key=value` pairs. Exit status is 0 on success,
// 1 on a runtime failure and 2 on a usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "uiu/checkpoint.hpp"
#include "uiu/data.hpp"
#include "uiu/metrics.hpp"
#include "uiu/model.hpp"
#include "uiu/tensor_io.hpp"
#include "uiu/train.hpp"

namespace {

using namespace uiu;

constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<Tensor> predict_all(const ModelParams& model, const std::vector<Sample>& data) {
  std::vector<Tensor> out;
  out.reserve(data.size());
  for (const Sample& s : data) out.push_back(infer(model, s.image));
  return out;
}

std::vector<Tensor> load_predictions(const std::filesystem::path& dir, const std::vector<Sample>& data) {
  std::vector<Tensor> out;
  for (const Sample& s : data) out.push_back(load_pgm(dir / (s.name + ".pred.pgm")));
  return out;
}

std::vector<Tensor> masks_of(const std::vector<Sample>& data) {
  std::vector<Tensor> out;
  for (const Sample& s : data) out.push_back(s.mask);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infrared small-target segmentation: data, training, inference and evaluation"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // gen-data
  std::filesystem::path gd_out;
  int64_t gd_n = 8;
  DatasetTemplate tmpl;
  uint64_t gd_seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset of image/mask PGM pairs");
  gen->add_option("--out", gd_out, "Output directory")->required();
  gen->add_option("--n", gd_n, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--size", tmpl.size, "Image side length in pixels");
  gen->add_option("--seed", gd_seed, "Dataset seed");
  gen->add_option("--min-targets", tmpl.min_targets, "Fewest targets per scene");
  gen->add_option("--max-targets", tmpl.max_targets, "Most targets per scene");

  // train
  std::filesystem::path tr_data, tr_model_cfg, tr_train_cfg, tr_out, tr_loss_csv, tr_init_out;
  bool tr_quiet = false;
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint plus a loss curve");
  train->add_option("--data", tr_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--model-cfg", tr_model_cfg, "Model config file")->required()->check(CLI::ExistingFile);
  train->add_option("--train-cfg", tr_train_cfg, "Training config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr_out, "Checkpoint path")->required();
  train->add_option("--loss-csv", tr_loss_csv, "Loss curve CSV (default: <out>.loss.csv)");
  train->add_option("--init-out", tr_init_out, "Also write the untrained checkpoint here");
  train->add_flag("--quiet", tr_quiet, "Suppress per-epoch lines");

  // infer
  std::filesystem::path in_ckpt, in_image, in_out, in_pgm;
  auto* inf = app.add_subcommand("infer", "Write the fused probability map for one image");
  inf->add_option("--ckpt", in_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--image", in_image, "Input PGM")->required()->check(CLI::ExistingFile);
  inf->add_option("--out", in_out, "Probability map (tensor file)")->required();
  inf->add_option("--pgm", in_pgm, "8-bit visualization (default: <out>.pgm)");

  // eval
  std::filesystem::path ev_ckpt, ev_pred, ev_data, ev_out = "report.csv";
  float ev_thr = 0.5f;
  int ev_nthr = 100;
  auto* eval = app.add_subcommand("eval", "Compute IoU, nIoU and AUC on a dataset");
  auto* ev_ckpt_opt = eval->add_option("--ckpt", ev_ckpt, "Checkpoint")->check(CLI::ExistingFile);
  auto* ev_pred_opt =
      eval->add_option("--pred", ev_pred, "Directory of <name>.pred.pgm score maps instead of a checkpoint")
          ->check(CLI::ExistingDirectory);
  ev_ckpt_opt->excludes(ev_pred_opt);
  eval->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--thr", ev_thr, "Decision threshold")->check(CLI::Range(0.0f, 1.0f));
  eval->add_option("--n-thr", ev_nthr, "ROC thresholds used for the AUC")->check(CLI::NonNegativeNumber);
  eval->add_option("--out", ev_out, "Report CSV");

  // roc
  std::filesystem::path rc_ckpt, rc_pred, rc_data, rc_out = "roc.csv", rc_svg;
  int rc_nthr = 100;
  std::string rc_mode = "standard";
  auto* rocc = app.add_subcommand("roc", "Write the ROC curve of a model on a dataset");
  auto* rc_ckpt_opt = rocc->add_option("--ckpt", rc_ckpt, "Checkpoint")->check(CLI::ExistingFile);
  auto* rc_pred_opt =
      rocc->add_option("--pred", rc_pred, "Directory of <name>.pred.pgm score maps instead of a checkpoint")
          ->check(CLI::ExistingDirectory);
  rc_ckpt_opt->excludes(rc_pred_opt);
  rocc->add_option("--data", rc_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  rocc->add_option("--n-thr", rc_nthr, "Evenly spaced thresholds in [0,1]")->check(CLI::NonNegativeNumber);
  rocc->add_option("--fpr-mode", rc_mode, "standard: FP/(FP+TN); paper: FP/P")
      ->check(CLI::IsMember({"standard", "paper"}));
  rocc->add_option("--out", rc_out, "ROC CSV");
  rocc->add_option("--svg", rc_svg, "Optional SVG plot");

  // report
  std::string rp_preset = "full";
  std::filesystem::path rp_cfg;
  int64_t rp_size = 320;
  auto* rep = app.add_subcommand("report", "Print parameter and FLOP counts");
  auto* rp_preset_opt =
      rep->add_option("--preset", rp_preset, "tiny, small or full")->check(CLI::IsMember({"tiny", "small", "full"}));
  rep->add_option("--model-cfg", rp_cfg, "Model config file instead of a preset")
      ->check(CLI::ExistingFile)
      ->excludes(rp_preset_opt);
  rep->add_option("--size", rp_size, "Square input side")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) {
      tmpl.validate();
      const std::vector<Sample> samples = gen_dataset(gd_n, tmpl, gd_seed);
      write_dataset(gd_out, samples);
      int64_t targets = 0;
      for (const Sample& s : samples) targets += static_cast<int64_t>(s.spec->targets.size());
      std::cout << "samples=" << samples.size() << " targets=" << targets << " size=" << tmpl.size
                << " seed=" << gd_seed << " out=" << gd_out.string() << '\n';
    } else if (*train) {
      ModelConfig mcfg;
      TrainConfig tcfg;
      try {
        mcfg = ModelConfig::load(tr_model_cfg);
        mcfg.validate();
        tcfg = TrainConfig::load(tr_train_cfg);
        tcfg.validate(mcfg.num_side_outputs() + 1);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
      const std::vector<Sample> data = load_dataset(tr_data);
      Prng rng(tcfg.seed);
      ModelParams model = build_model(mcfg, rng);
      if (!tr_init_out.empty()) save_checkpoint(tr_init_out, model, tcfg, AdamState{});
      TrainOptions opts;
      opts.checkpoint = tr_out;
      opts.loss_csv = tr_loss_csv.empty() ? std::filesystem::path(tr_out.string() + ".loss.csv") : tr_loss_csv;
      opts.log = tr_quiet ? nullptr : &std::cerr;
      const TrainResult r = train_loop(model, data, tcfg, opts);
      std::cout << "steps=" << r.steps.size() << " initial_loss=" << fixed(r.steps.front().loss)
                << " final_loss=" << fixed(r.steps.back().loss) << " final_iou=" << fixed(r.steps.back().iou, 4)
                << " ckpt=" << tr_out.string() << " loss_csv=" << opts.loss_csv.string() << '\n';
    } else if (*inf) {
      const Checkpoint ck = load_checkpoint(in_ckpt);
      const Tensor image = load_pgm(in_image);
      const Tensor prob = infer(ck.model, image);
      save_tensor(in_out, prob);
      const std::filesystem::path pgm = in_pgm.empty() ? std::filesystem::path(in_out.string() + ".pgm") : in_pgm;
      save_pgm(prob, pgm);
      float peak = 0.0f;
      for (float p : prob.data()) peak = std::max(peak, p);
      std::cout << "height=" << prob.shape().h << " width=" << prob.shape().w << " max_prob=" << fixed(peak)
                << " out=" << in_out.string() << " pgm=" << pgm.string() << '\n';
    } else if (*eval || *rocc) {
      const bool is_eval = static_cast<bool>(*eval);
      const auto& ckpt = is_eval ? ev_ckpt : rc_ckpt;
      const auto& pred = is_eval ? ev_pred : rc_pred;
      if (ckpt.empty() == pred.empty()) throw UsageError("exactly one of --ckpt or --pred is required");
      const std::vector<Sample> data = load_dataset(is_eval ? ev_data : rc_data);
      std::vector<Tensor> scores;
      if (!ckpt.empty()) {
        const Checkpoint ck = load_checkpoint(ckpt);
        scores = predict_all(ck.model, data);
      } else {
        scores = load_predictions(pred, data);
      }
      const std::vector<Tensor> truths = masks_of(data);
      if (is_eval) {
        const MetricsReport r = evaluate(scores, truths, ev_thr, ev_nthr);
        write_report_csv(ev_out, r);
        std::cout << "samples=" << r.n_samples << " thr=" << fixed(r.threshold, 4) << " iou=" << fixed(r.iou)
                  << " niou=" << fixed(r.niou) << " auc=" << fixed(r.roc.auc) << " out=" << ev_out.string() << '\n';
      } else {
        const FprMode mode = rc_mode == "paper" ? FprMode::paper_literal : FprMode::standard;
        const RocCurve c = roc(scores, truths, rc_nthr, mode);
        write_roc_csv(rc_out, c);
        if (!rc_svg.empty()) write_roc_svg(rc_svg, c);
        std::cout << "points=" << c.points.size() << " fpr_mode=" << rc_mode << " auc=" << fixed(c.auc)
                  << " out=" << rc_out.string() << '\n';
      }
    } else if (*rep) {
      ModelConfig cfg;
      try {
        cfg = rp_cfg.empty() ? ModelConfig::from_preset(parse_preset(rp_preset)) : ModelConfig::load(rp_cfg);
        cfg.validate();
        cfg.check_input(rp_size, rp_size);
      } catch (const ShapeError& e) {
        throw UsageError(e.what());
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
      const int64_t params = count_params(cfg);
      const int64_t flops = count_flops(cfg, rp_size, rp_size);
      std::cout << "preset=" << (rp_cfg.empty() ? rp_preset : to_string(cfg.preset)) << " size=" << rp_size
                << " params=" << params << " params_m=" << fixed(params / 1e6, 2) << " macs=" << flops / 2
                << " flops=" << flops << " flops_g=" << fixed(flops / 1e9, 2)
                << " reference_params=50.54M reference_flops=33.64G\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
