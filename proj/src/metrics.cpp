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

#include "uiu/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace uiu {

namespace {

void check_pairs(std::span<const Tensor> a, std::span<const Tensor> b) {
  if (a.empty()) throw std::invalid_argument("metrics: empty sample list");
  if (a.size() != b.size()) {
    throw std::invalid_argument("metrics: " + std::to_string(a.size()) + " predictions vs " +
                                std::to_string(b.size()) + " references");
  }
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].numel() != b[i].numel()) {
      throw ShapeError("metrics: sample " + std::to_string(i) + " prediction " + a[i].shape().str() +
                       " vs reference " + b[i].shape().str());
    }
  }
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

Tensor binarize(const Tensor& scores, float thr) {
  Tensor out(scores.shape());
  auto s = scores.data();
  auto o = out.data();
  for (size_t i = 0; i < s.size(); ++i) o[i] = s[i] >= thr ? 1.0f : 0.0f;
  return out;
}

ConfusionCounts confusion(const Tensor& scores, const Tensor& truth, float thr) {
  if (scores.numel() != truth.numel()) {
    throw ShapeError("confusion: " + scores.shape().str() + " vs " + truth.shape().str());
  }
  ConfusionCounts c;
  auto s = scores.data();
  auto t = truth.data();
  for (size_t i = 0; i < s.size(); ++i) {
    const bool p = s[i] >= thr;
    const bool g = t[i] >= 0.5f;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double sample_iou(const ConfusionCounts& c, EmptyPolicy policy) {
  const uint64_t uni = c.tp + c.fp + c.fn;
  if (uni == 0) return policy == EmptyPolicy::one ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(uni);
}

double iou_dataset(std::span<const Tensor> preds, std::span<const Tensor> truths) {
  check_pairs(preds, truths);
  ConfusionCounts total;
  for (size_t i = 0; i < preds.size(); ++i) total += confusion(preds[i], truths[i]);
  return sample_iou(total, EmptyPolicy::one);
}

std::vector<double> per_sample_iou(std::span<const Tensor> preds, std::span<const Tensor> truths,
                                   EmptyPolicy policy) {
  check_pairs(preds, truths);
  std::vector<double> out;
  for (size_t i = 0; i < preds.size(); ++i) out.push_back(sample_iou(confusion(preds[i], truths[i]), policy));
  return out;
}

double niou(std::span<const Tensor> preds, std::span<const Tensor> truths, EmptyPolicy policy) {
  const auto ious = per_sample_iou(preds, truths, policy);
  double acc = 0.0;
  for (double v : ious) acc += v;
  return acc / static_cast<double>(ious.size());
}

std::vector<float> roc_thresholds(int n_thresholds) {
  if (n_thresholds < 0) throw std::invalid_argument("roc: n_thresholds must be >= 0");
  std::vector<float> t = {0.0f, 1.0f};
  if (n_thresholds == 1) t.push_back(0.5f);
  for (int i = 0; i < n_thresholds && n_thresholds > 1; ++i) {
    t.push_back(static_cast<float>(static_cast<double>(i) / static_cast<double>(n_thresholds - 1)));
  }
  std::sort(t.begin(), t.end(), std::greater<float>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

RocCurve roc(std::span<const Tensor> scores, std::span<const Tensor> truths, int n_thresholds, FprMode mode) {
  check_pairs(scores, truths);
  uint64_t positives = 0;
  for (const Tensor& t : truths) {
    for (float v : t.data()) positives += v >= 0.5f ? 1 : 0;
  }
  if (positives == 0) throw std::invalid_argument("roc: no positive reference pixels, TPR is undefined");

  RocCurve curve;
  curve.fpr_mode = mode;
  for (float thr : roc_thresholds(n_thresholds)) {
    RocPoint p;
    p.threshold = thr;
    for (size_t i = 0; i < scores.size(); ++i) p.counts += confusion(scores[i], truths[i], thr);
    const ConfusionCounts& c = p.counts;
    p.tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const uint64_t negatives = c.fp + c.tn;
    p.fpr_standard = negatives ? static_cast<double>(c.fp) / static_cast<double>(negatives) : 0.0;
    if (mode == FprMode::standard) {
      p.fpr = p.fpr_standard;
    } else {
      p.fpr = c.predicted() ? static_cast<double>(c.fp) / static_cast<double>(c.predicted()) : 0.0;
    }
    curve.points.push_back(p);
  }

  std::vector<std::pair<double, double>> pts = {{0.0, 0.0}};
  for (const RocPoint& p : curve.points) pts.emplace_back(p.fpr_standard, p.tpr);
  std::sort(pts.begin(), pts.end());
  double auc = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) {
    auc += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  }
  curve.auc = auc;
  return curve;
}

Components connected_components(const Tensor& mask) {
  const int64_t h = mask.shape().h, w = mask.shape().w;
  Components out;
  out.labels.assign(static_cast<size_t>(h * w), 0);
  auto m = mask.data();
  std::vector<int64_t> stack;
  for (int64_t start = 0; start < h * w; ++start) {
    if (m[static_cast<size_t>(start)] < 0.5f || out.labels[static_cast<size_t>(start)] != 0) continue;
    const int32_t label = static_cast<int32_t>(++out.count);
    out.pixels.emplace_back();
    stack.assign(1, start);
    out.labels[static_cast<size_t>(start)] = label;
    while (!stack.empty()) {
      const int64_t at = stack.back();
      stack.pop_back();
      out.pixels.back().push_back(at);
      const int64_t y = at / w, x = at % w;
      for (int64_t dy = -1; dy <= 1; ++dy) {
        for (int64_t dx = -1; dx <= 1; ++dx) {
          const int64_t ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int64_t nb = ny * w + nx;
          if (m[static_cast<size_t>(nb)] >= 0.5f && out.labels[static_cast<size_t>(nb)] == 0) {
            out.labels[static_cast<size_t>(nb)] = label;
            stack.push_back(nb);
          }
        }
      }
    }
    std::sort(out.pixels.back().begin(), out.pixels.back().end());
  }
  return out;
}

MetricsReport evaluate(std::span<const Tensor> scores, std::span<const Tensor> truths, float threshold,
                       int n_thresholds, FprMode mode, EmptyPolicy policy) {
  check_pairs(scores, truths);
  MetricsReport r;
  r.threshold = threshold;
  r.n_samples = static_cast<int64_t>(scores.size());
  double acc = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const ConfusionCounts c = confusion(scores[i], truths[i], threshold);
    r.totals += c;
    r.per_sample_iou.push_back(sample_iou(c, policy));
    acc += r.per_sample_iou.back();
    r.objects_per_sample.push_back(connected_components(truths[i]).count);
  }
  r.iou = sample_iou(r.totals, EmptyPolicy::one);
  r.niou = acc / static_cast<double>(scores.size());
  r.roc = roc(scores, truths, n_thresholds, mode);
  return r;
}

void write_report_csv(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  int64_t objects = 0;
  for (int64_t m : r.objects_per_sample) objects += m;
  out << "metric,value\n";
  out << "threshold," << num(r.threshold) << '\n';
  out << "iou," << num(r.iou) << '\n';
  out << "niou," << num(r.niou) << '\n';
  out << "auc," << num(r.roc.auc) << '\n';
  out << "n_samples," << r.n_samples << '\n';
  out << "objects," << objects << '\n';
  out << "tp," << r.totals.tp << '\n';
  out << "fp," << r.totals.fp << '\n';
  out << "fn," << r.totals.fn << '\n';
  out << "tn," << r.totals.tn << '\n';
  for (size_t i = 0; i < r.per_sample_iou.size(); ++i) out << "iou." << i << ',' << num(r.per_sample_iou[i]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "thr,fpr,tpr\n";
  for (const RocPoint& p : curve.points) out << num(p.threshold) << ',' << num(p.fpr) << ',' << num(p.tpr) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_roc_svg(const std::filesystem::path& path, const RocCurve& curve) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  constexpr double size = 400.0, margin = 40.0;
  auto px = [&](double fpr) { return margin + size * std::clamp(fpr, 0.0, 1.0); };
  auto py = [&](double tpr) { return margin + size * (1.0 - tpr); };
  std::vector<std::pair<double, double>> pts;
  for (const RocPoint& p : curve.points) pts.emplace_back(p.fpr, p.tpr);
  std::sort(pts.begin(), pts.end());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\">\n";
  out << "<rect x=\"40\" y=\"40\" width=\"400\" height=\"400\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<line x1=\"40\" y1=\"440\" x2=\"440\" y2=\"40\" stroke=\"#bbb\" stroke-dasharray=\"4\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"#c00\" stroke-width=\"2\" points=\"";
  for (const auto& [f, t] : pts) out << num(px(f)) << ',' << num(py(t)) << ' ';
  out << "\"/>\n";
  out << "<text x=\"240\" y=\"470\" text-anchor=\"middle\">FPR</text>\n";
  out << "<text x=\"12\" y=\"240\" transform=\"rotate(-90 12 240)\" text-anchor=\"middle\">TPR</text>\n";
  out << "<text x=\"430\" y=\"430\" text-anchor=\"end\">AUC " << num(curve.auc) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace uiu
