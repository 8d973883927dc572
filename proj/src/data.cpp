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

#include "uiu/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace uiu {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Zero-mean unit-std field: white noise through a separable Gaussian.
std::vector<double> lowpass_field(int64_t h, int64_t w, float cutoff, Prng& rng) {
  std::vector<double> field(static_cast<size_t>(h * w));
  for (double& v : field) v = rng.normal();
  const double sigma = 1.0 / (2.0 * M_PI * std::max(cutoff, 1e-3f));
  const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    norm += kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  }
  for (double& k : kernel) k /= norm;
  auto clampi = [](int64_t v, int64_t hi) { return std::clamp<int64_t>(v, 0, hi - 1); };
  std::vector<double> tmp(field.size());
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int64_t i = -radius; i <= radius; ++i) acc += kernel[static_cast<size_t>(i + radius)] * field[static_cast<size_t>(y * w + clampi(x + i, w))];
      tmp[static_cast<size_t>(y * w + x)] = acc;
    }
  }
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int64_t i = -radius; i <= radius; ++i) acc += kernel[static_cast<size_t>(i + radius)] * tmp[static_cast<size_t>(clampi(y + i, h) * w + x)];
      field[static_cast<size_t>(y * w + x)] = acc;
    }
  }
  double mean = 0.0, sq = 0.0;
  for (double v : field) mean += v;
  mean /= static_cast<double>(field.size());
  for (double v : field) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(field.size()));
  for (double& v : field) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return field;
}

}  // namespace

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("scene: width and height must be >= 1");
  if (!(mask_level > 0.0f && mask_level < 1.0f)) throw std::invalid_argument("scene: mask_level must be in (0,1)");
  if (noise_std < 0.0f) throw std::invalid_argument("scene: noise_std must be >= 0");
  for (size_t i = 0; i < targets.size(); ++i) {
    const Target& t = targets[i];
    const std::string who = "scene: target " + std::to_string(i) + ": ";
    if (!(t.sigma > 0.0f)) throw std::invalid_argument(who + "sigma must be > 0");
    if (!(6.0f * t.sigma < kMaxTargetExtent)) {
      throw std::invalid_argument(who + "6-sigma footprint " + fmt("%.3g", 6.0 * t.sigma) + " px is not below 30 px");
    }
    if (!(t.amplitude > 0.0f && t.amplitude <= 1.0f)) throw std::invalid_argument(who + "amplitude must be in (0,1]");
    const float r = 3.0f * t.sigma;
    if (t.cx - r < 0.0f || t.cy - r < 0.0f || t.cx + r > static_cast<float>(width - 1) ||
        t.cy + r > static_cast<float>(height - 1)) {
      throw std::invalid_argument(who + "6-sigma footprint does not fit inside the image");
    }
  }
}

Sample gen_scene(const SceneSpec& spec) {
  spec.validate();
  const int64_t h = spec.height, w = spec.width;
  Prng rng(spec.seed);
  std::vector<double> img(static_cast<size_t>(h * w), spec.background.level);
  const Background& bg = spec.background;
  if (bg.kind == Background::Kind::lowpass_noise) {
    const auto field = lowpass_field(h, w, bg.cutoff, rng);
    for (size_t i = 0; i < img.size(); ++i) img[i] += bg.gain * field[i];
  } else if (bg.kind == Background::Kind::gradient) {
    const double ca = std::cos(bg.angle), sa = std::sin(bg.angle);
    const double extent = std::fabs(ca) * static_cast<double>(w - 1) + std::fabs(sa) * static_cast<double>(h - 1);
    const double lo = std::min(0.0, ca * static_cast<double>(w - 1)) + std::min(0.0, sa * static_cast<double>(h - 1));
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double t = extent > 0.0 ? (ca * static_cast<double>(x) + sa * static_cast<double>(y) - lo) / extent : 0.5;
        img[static_cast<size_t>(y * w + x)] += bg.gain * (t - 0.5);
      }
    }
  }

  Tensor mask({1, 1, h, w});
  for (const Target& t : spec.targets) {
    const double two_s2 = 2.0 * static_cast<double>(t.sigma) * t.sigma;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double dx = static_cast<double>(x) - t.cx, dy = static_cast<double>(y) - t.cy;
        const double g = std::exp(-(dx * dx + dy * dy) / two_s2);
        img[static_cast<size_t>(y * w + x)] += t.amplitude * g;
        if (g >= static_cast<double>(spec.mask_level)) mask.at(0, 0, y, x) = 1.0f;
      }
    }
  }
  if (spec.noise_std > 0.0f) {
    for (double& v : img) v += spec.noise_std * rng.normal();
  }
  Tensor grey({1, 1, h, w});
  for (size_t i = 0; i < img.size(); ++i) grey.data()[i] = static_cast<float>(std::clamp(img[i], 0.0, 1.0));

  Sample s;
  s.image = replicate_channels(grey, 3);
  s.mask = mask;
  s.spec = spec;
  return s;
}

void DatasetTemplate::validate() const {
  if (size < 8) throw std::invalid_argument("dataset: size must be >= 8");
  if (min_targets < 0 || max_targets < min_targets) throw std::invalid_argument("dataset: bad target count range");
  if (!(sigma_min > 0.0f && sigma_max >= sigma_min && 6.0f * sigma_max < kMaxTargetExtent)) {
    throw std::invalid_argument("dataset: sigma range must satisfy 0 < min <= max < 5");
  }
  if (!(amplitude_min > 0.0f && amplitude_max >= amplitude_min && amplitude_max <= 1.0f)) {
    throw std::invalid_argument("dataset: amplitude range must lie in (0,1]");
  }
  if (static_cast<float>(size - 1) < 6.0f * sigma_max) throw std::invalid_argument("dataset: image too small for targets");
}

SceneSpec sample_scene_spec(const DatasetTemplate& tmpl, uint64_t seed, int64_t index) {
  tmpl.validate();
  Prng rng(Prng::derive(seed, static_cast<uint64_t>(index)));
  SceneSpec spec;
  spec.width = spec.height = tmpl.size;
  spec.noise_std = tmpl.noise_std;
  spec.seed = rng.next_u64();
  Background& bg = spec.background;
  bg.kind = static_cast<Background::Kind>(rng.uniform_int(0, 2));
  bg.level = static_cast<float>(rng.uniform(tmpl.level_min, tmpl.level_max));
  bg.cutoff = static_cast<float>(rng.uniform(0.03, 0.12));
  bg.gain = bg.kind == Background::Kind::flat ? 0.0f : static_cast<float>(rng.uniform(0.0, tmpl.clutter_gain) * 2.0);
  if (bg.kind == Background::Kind::lowpass_noise) bg.gain *= 0.5f;
  bg.angle = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));

  const int64_t count = rng.uniform_int(tmpl.min_targets, tmpl.max_targets);
  const double mask_radius = std::sqrt(-2.0 * std::log(static_cast<double>(spec.mask_level)));
  const double edge = static_cast<double>(tmpl.size - 1);
  for (int64_t k = 0; k < count; ++k) {
    Target t;
    t.sigma = static_cast<float>(rng.uniform(tmpl.sigma_min, tmpl.sigma_max));
    t.amplitude = static_cast<float>(rng.uniform(tmpl.amplitude_min, tmpl.amplitude_max));
    const double r = 3.0 * t.sigma;
    // Keep mask discs two pixels apart so every mask component stays one target.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      t.cx = static_cast<float>(rng.uniform(std::ceil(r), std::floor(edge - r)));
      t.cy = static_cast<float>(rng.uniform(std::ceil(r), std::floor(edge - r)));
      bool clear = true;
      for (const Target& o : spec.targets) {
        const double gap = mask_radius * (t.sigma + o.sigma) + 2.0;
        clear = clear && (std::fabs(t.cx - o.cx) > gap || std::fabs(t.cy - o.cy) > gap);
      }
      if (clear) break;
      if (attempt == 999) throw std::runtime_error("dataset: cannot place " + std::to_string(count) + " disjoint targets in a " +
                                 std::to_string(tmpl.size) + " px image; lower max_targets or sigma_max");
    }
    spec.targets.push_back(t);
  }
  return spec;
}

std::vector<Sample> gen_dataset(int64_t n, const DatasetTemplate& tmpl, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("dataset: n must be >= 1");
  std::vector<Sample> out;
  for (int64_t i = 0; i < n; ++i) {
    Sample s = gen_scene(sample_scene_spec(tmpl, seed, i));
    s.name = "sample_" + fmt("%05.0f", static_cast<double>(i));
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!manifest) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
  manifest << "filename,targets,centers\n";
  for (const Sample& s : samples) {
    save_pgm(s.image, dir / (s.name + ".img.pgm"));
    save_pgm(s.mask, dir / (s.name + ".mask.pgm"));
    manifest << s.name << ".img.pgm,";
    if (s.spec) {
      manifest << s.spec->targets.size() << ',';
      for (size_t k = 0; k < s.spec->targets.size(); ++k) {
        manifest << (k ? ";" : "") << fmt("%.3f", s.spec->targets[k].cx) << ':' << fmt("%.3f", s.spec->targets[k].cy);
      }
    } else {
      manifest << ',';
    }
    manifest << '\n';
  }
  if (!manifest) throw std::runtime_error("write failed: " + (dir / "manifest.csv").string());
}

uint8_t to_byte(float v) {
  const double scaled = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  return static_cast<uint8_t>(std::floor(scaled + 0.5));
}

Tensor load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  if (token() != "P5") throw std::runtime_error(path.string() + ": not a binary PGM (P5)");
  int64_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoll(token());
    h = std::stoll(token());
    maxval = std::stoll(token());
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + ": malformed PGM header");
  }
  if (maxval != 255) throw std::runtime_error(path.string() + ": maxval must be 255, got " + std::to_string(maxval));
  if (w < 1 || h < 1) throw std::runtime_error(path.string() + ": invalid PGM size");
  std::vector<unsigned char> bytes(static_cast<size_t>(w * h));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<size_t>(in.gcount()) != bytes.size()) throw std::runtime_error(path.string() + ": truncated PGM payload");
  Tensor t({1, 1, h, w});
  for (size_t i = 0; i < bytes.size(); ++i) t.data()[i] = static_cast<float>(bytes[i]) / 255.0f;
  return t;
}

void save_pgm(const Tensor& t, const std::filesystem::path& path) {
  const Shape& s = t.shape();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << s.w << ' ' << s.h << "\n255\n";
  std::vector<char> bytes(static_cast<size_t>(s.plane()));
  for (int64_t i = 0; i < s.plane(); ++i) bytes[static_cast<size_t>(i)] = static_cast<char>(to_byte(t.data()[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("dataset directory not found: " + dir.string());
  std::map<std::string, std::pair<bool, bool>> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    auto ends = [&](const std::string& suffix) {
      return name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends(".img.pgm")) stems[name.substr(0, name.size() - 8)].first = true;
    if (ends(".mask.pgm")) stems[name.substr(0, name.size() - 9)].second = true;
  }
  if (stems.empty()) throw std::runtime_error("dataset directory " + dir.string() + " holds no *.img.pgm / *.mask.pgm pairs");
  std::vector<Sample> out;
  for (const auto& [stem, present] : stems) {
    if (!present.first) throw std::runtime_error("unpaired file " + (dir / (stem + ".mask.pgm")).string() + ": image missing");
    if (!present.second) throw std::runtime_error("unpaired file " + (dir / (stem + ".img.pgm")).string() + ": mask missing");
    Sample s;
    s.name = stem;
    const Tensor grey = load_pgm(dir / (stem + ".img.pgm"));
    s.mask = load_pgm(dir / (stem + ".mask.pgm"));
    if (s.mask.shape() != grey.shape()) throw std::runtime_error("mask size differs from image for " + stem);
    for (float& v : s.mask.data()) v = v >= 128.0f / 255.0f ? 1.0f : 0.0f;
    s.image = replicate_channels(grey, 3);
    out.push_back(std::move(s));
  }
  return out;
}

Tensor replicate_channels(const Tensor& grey, int64_t channels) {
  const Shape& s = grey.shape();
  if (s.c != 1) throw ShapeError("replicate_channels expects one channel, got " + s.str());
  Tensor out({s.n, channels, s.h, s.w});
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < channels; ++c) {
      std::copy_n(grey.ptr() + n * s.plane(), s.plane(), out.ptr() + (n * channels + c) * s.plane());
    }
  }
  return out;
}

namespace {
Tensor stack(const std::vector<const Sample*>& batch, bool masks) {
  if (batch.empty()) throw ShapeError("cannot stack an empty batch");
  const Shape s0 = masks ? batch[0]->mask.shape() : batch[0]->image.shape();
  Tensor out({static_cast<int64_t>(batch.size()), s0.c, s0.h, s0.w});
  const int64_t block = s0.c * s0.plane();
  for (size_t i = 0; i < batch.size(); ++i) {
    const Tensor& t = masks ? batch[i]->mask : batch[i]->image;
    if (t.shape() != s0) throw ShapeError("batch mixes sizes " + s0.str() + " and " + t.shape().str());
    std::copy_n(t.ptr(), block, out.ptr() + static_cast<int64_t>(i) * block);
  }
  return out;
}
}  // namespace

Tensor stack_images(const std::vector<const Sample*>& batch) { return stack(batch, false); }
Tensor stack_masks(const std::vector<const Sample*>& batch) { return stack(batch, true); }

}  // namespace uiu
