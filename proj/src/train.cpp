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

#include "uiu/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "uiu/checkpoint.hpp"
#include "uiu/metrics.hpp"
#include "uiu/ops.hpp"

namespace uiu {

namespace {

std::string num(double v, const char* f = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
  kv.reject_unknown({"lr", "beta1", "beta2", "eps_adam", "batch_size", "epochs", "max_steps", "seed",
                     "loss_weights", "iou_threshold", "checkpoint_every"});
  TrainConfig c;
  c.lr = static_cast<float>(kv.get_double("lr", c.lr));
  c.beta1 = static_cast<float>(kv.get_double("beta1", c.beta1));
  c.beta2 = static_cast<float>(kv.get_double("beta2", c.beta2));
  c.eps_adam = static_cast<float>(kv.get_double("eps_adam", c.eps_adam));
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.epochs = kv.get_int("epochs", c.epochs);
  c.max_steps = kv.get_int("max_steps", c.max_steps);
  c.seed = kv.get_u64("seed", c.seed);
  for (double w : kv.get_doubles("loss_weights")) c.loss_weights.push_back(static_cast<float>(w));
  c.iou_threshold = static_cast<float>(kv.get_double("iou_threshold", c.iou_threshold));
  c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return from_kv(KvConfig::load(path)); }

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "lr = " << num(lr) << '\n'
     << "beta1 = " << num(beta1) << '\n'
     << "beta2 = " << num(beta2) << '\n'
     << "eps_adam = " << num(eps_adam) << '\n'
     << "batch_size = " << batch_size << '\n'
     << "epochs = " << epochs << '\n'
     << "max_steps = " << max_steps << '\n'
     << "seed = " << seed << '\n';
  if (!loss_weights.empty()) {
    os << "loss_weights = ";
    for (size_t i = 0; i < loss_weights.size(); ++i) os << (i ? "," : "") << num(loss_weights[i]);
    os << '\n';
  }
  os << "iou_threshold = " << num(iou_threshold) << '\n' << "checkpoint_every = " << checkpoint_every << '\n';
  return os.str();
}

void TrainConfig::validate(int outputs) const {
  if (!(lr >= 0.0f)) throw ConfigError("lr must be >= 0");
  if (!(beta1 >= 0.0f && beta1 < 1.0f && beta2 >= 0.0f && beta2 < 1.0f)) {
    throw ConfigError("beta1 and beta2 must lie in [0,1)");
  }
  if (!(eps_adam >= 0.0f)) throw ConfigError("eps_adam must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0 || max_steps < 0 || checkpoint_every < 0) {
    throw ConfigError("epochs, max_steps and checkpoint_every must be >= 0");
  }
  if (!loss_weights.empty()) {
    if (static_cast<int>(loss_weights.size()) != outputs) {
      throw ConfigError("loss_weights has " + std::to_string(loss_weights.size()) + " entries, model has " +
                        std::to_string(outputs) + " outputs (side maps + fused)");
    }
    bool any = false;
    for (float w : loss_weights) {
      if (!(w >= 0.0f)) throw ConfigError("loss_weights must be >= 0");
      any = any || w > 0.0f;
    }
    if (!any) throw ConfigError("loss_weights must not all be zero");
  }
}

std::vector<float> TrainConfig::weights_for(int outputs) const {
  validate(outputs);
  if (loss_weights.empty()) return std::vector<float>(static_cast<size_t>(outputs), 1.0f);
  return loss_weights;
}

Tensor total_loss(const SideOutputs& outputs, const Tensor& target, const std::vector<float>& weights) {
  const std::vector<Tensor> logits = outputs.all_logits();
  if (weights.size() != logits.size()) {
    throw ShapeError("total_loss: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(logits.size()) + " outputs");
  }
  Tensor total;
  for (size_t k = 0; k < logits.size(); ++k) {
    Tensor term = ops::scale(ops::bce_loss(ops::sigmoid(logits[k]), target), weights[k]);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

void adam_step(ParamStore& store, AdamState& state, const TrainConfig& cfg) {
  std::vector<Tensor*> weights;
  for (auto& e : store.entries()) {
    if (e.kind == ParamKind::weight) weights.push_back(&e.tensor);
  }
  if (state.m.empty()) {
    for (Tensor* w : weights) {
      state.m.emplace_back(static_cast<size_t>(w->numel()), 0.0f);
      state.v.emplace_back(static_cast<size_t>(w->numel()), 0.0f);
    }
  }
  if (state.m.size() != weights.size()) throw std::logic_error("adam_step: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), t);
  const float b1 = cfg.beta1, b2 = cfg.beta2;
  for (size_t i = 0; i < weights.size(); ++i) {
    Tensor& w = *weights[i];
    auto theta = w.data();
    auto g = w.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t j = 0; j < theta.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] = static_cast<float>(theta[j] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps_adam));
    }
  }
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepRecord>& steps) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,loss,iou\n";
  for (const StepRecord& s : steps) out << s.step << ',' << num(s.loss) << ',' << num(s.iou) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

TrainResult train_loop(ModelParams& model, const std::vector<Sample>& dataset, const TrainConfig& cfg,
                       const TrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  const int outputs = model.cfg.num_side_outputs() + 1;
  const std::vector<float> weights = cfg.weights_for(outputs);
  const Shape s0 = dataset.front().image.shape();
  for (const Sample& s : dataset) {
    if (s.image.shape() != s0) {
      throw ShapeError("train: sample " + s.name + " is " + s.image.shape().str() + ", expected " + s0.str());
    }
  }
  model.cfg.check_input(s0.h, s0.w);

  TrainResult result;
  const size_t n = dataset.size();
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  bool done = false;
  for (int64_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Prng shuffle(Prng::derive(cfg.seed, static_cast<uint64_t>(epoch)));
    for (size_t i = n; i-- > 1;) std::swap(order[i], order[static_cast<size_t>(shuffle.uniform_int(0, static_cast<int64_t>(i)))]);

    double epoch_sum = 0.0;
    int64_t epoch_steps = 0;
    for (size_t start = 0; start < n; start += batch) {
      std::vector<const Sample*> members;
      for (size_t i = start; i < std::min(n, start + batch); ++i) members.push_back(&dataset[order[i]]);
      const Tensor x = stack_images(members);
      const Tensor y = stack_masks(members);
      const int64_t step = static_cast<int64_t>(result.steps.size()) + 1;

      Tape tape;
      SideOutputs out;
      Tensor loss;
      {
        TapeScope scope(tape);
        out = forward(model, x, true);
        loss = total_loss(out, y, weights);
      }
      const double value = loss.item();
      if (!std::isfinite(value)) throw TrainingError("non-finite loss at step " + std::to_string(step), step);
      model.store.zero_grad();
      tape.backward(loss);
      adam_step(model.store, result.adam, cfg);

      Tensor prob;
      {
        NoGradScope no_grad;
        prob = ops::sigmoid(out.fused);
      }
      const double iou = sample_iou(confusion(prob, y, cfg.iou_threshold));
      result.steps.push_back({step, value, iou});
      epoch_sum += value;
      ++epoch_steps;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        done = true;
        break;
      }
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
    if (options.log != nullptr) {
      *options.log << "epoch=" << epoch + 1 << " steps=" << result.steps.size()
                   << " loss=" << num(result.epoch_loss.back(), "%.6f")
                   << " iou=" << num(result.steps.back().iou, "%.4f") << '\n';
    }
    if (!options.checkpoint.empty() && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(options.checkpoint, model, cfg, result.adam);
    }
  }
  if (!options.checkpoint.empty()) save_checkpoint(options.checkpoint, model, cfg, result.adam);
  if (!options.loss_csv.empty()) write_loss_csv(options.loss_csv, result.steps);
  return result;
}

}  // namespace uiu
