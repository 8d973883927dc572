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

#include "uiu/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace uiu::ops {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

thread_local MacCounter* g_mac_counter = nullptr;
thread_local PatternScope* g_pattern = nullptr;

bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

template <class... Ts>
bool recording(const Ts&... ts) {
  return Tape::current() != nullptr && (wants_grad(ts) || ...);
}

/// Marks `out` as differentiable and appends it to the active tape.
void record(const char* name, std::vector<Tensor> inputs, Tensor& out,
            std::function<void(const Tensor&)> fn) {
  out.set_requires_grad(true);
  Tape::current()->record(name, std::move(inputs), out, std::move(fn));
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

struct ConvGeom {
  int64_t cin, h, w, kh, kw, hout, wout;
  int stride, pad, dilation;
  int64_t k() const { return cin * kh * kw; }
  int64_t p() const { return hout * wout; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

void im2col(const float* x, const ConvGeom& g, float* col) {
  const int64_t p = g.p();
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    const float* xc = x + ci * g.h * g.w;
    for (int64_t ki = 0; ki < g.kh; ++ki) {
      for (int64_t kj = 0; kj < g.kw; ++kj) {
        float* row = col + ((ci * g.kh + ki) * g.kw + kj) * p;
        for (int64_t oh = 0; oh < g.hout; ++oh) {
          const int64_t ih = oh * g.stride - g.pad + ki * g.dilation;
          float* dst = row + oh * g.wout;
          if (ih < 0 || ih >= g.h) {
            std::fill(dst, dst + g.wout, 0.0f);
            continue;
          }
          const float* src = xc + ih * g.w;
          for (int64_t ow = 0; ow < g.wout; ++ow) {
            const int64_t iw = ow * g.stride - g.pad + kj * g.dilation;
            dst[ow] = (iw >= 0 && iw < g.w) ? src[iw] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeom& g, float* x) {
  const int64_t p = g.p();
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    float* xc = x + ci * g.h * g.w;
    for (int64_t ki = 0; ki < g.kh; ++ki) {
      for (int64_t kj = 0; kj < g.kw; ++kj) {
        const float* row = col + ((ci * g.kh + ki) * g.kw + kj) * p;
        for (int64_t oh = 0; oh < g.hout; ++oh) {
          const int64_t ih = oh * g.stride - g.pad + ki * g.dilation;
          if (ih < 0 || ih >= g.h) continue;
          const float* src = row + oh * g.wout;
          float* dst = xc + ih * g.w;
          for (int64_t ow = 0; ow < g.wout; ++ow) {
            const int64_t iw = ow * g.stride - g.pad + kj * g.dilation;
            if (iw >= 0 && iw < g.w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

float sigmoid_scalar(float v) {
  if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
  const float e = std::exp(v);
  return e / (1.0f + e);
}

}  // namespace

MacCounter::MacCounter() : previous_(g_mac_counter) { g_mac_counter = this; }
MacCounter::~MacCounter() { g_mac_counter = previous_; }
PatternScope::PatternScope(std::vector<int64_t>& pattern, Mode mode)
    : pattern_(pattern), mode_(mode), previous_(g_pattern) {
  if (mode_ == Mode::record) pattern_.clear();
  g_pattern = this;
}
PatternScope::~PatternScope() { g_pattern = previous_; }
PatternScope* PatternScope::current() { return g_pattern; }

int64_t PatternScope::next(int64_t observed) {
  if (mode_ == Mode::record) {
    pattern_.push_back(observed);
    return observed;
  }
  if (cursor_ >= pattern_.size()) throw std::logic_error("PatternScope: replay ran past the recorded pattern");
  return pattern_[cursor_++];
}

void MacCounter::add(int64_t macs) {
  for (MacCounter* c = g_mac_counter; c != nullptr; c = c->previous_) c->count_ += macs;
}

int64_t conv_out_size(int64_t in, int64_t kernel, int stride, int pad, int dilation) {
  require(stride >= 1 && dilation >= 1 && pad >= 0, "conv2d: stride/dilation must be >= 1, pad >= 0");
  const int64_t span = in + 2 * pad - dilation * (kernel - 1) - 1;
  require(span >= 0, "conv2d: kernel footprint exceeds padded input");
  require(span % stride == 0, "conv2d: non-integral output size for input " + std::to_string(in) +
                                  ", stride " + std::to_string(stride));
  return span / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad, int dilation) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  require(ws.c == xs.c, "conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                            std::to_string(ws.c));
  require(ws.h % 2 == 1 && ws.w % 2 == 1, "conv2d: kernel sides must be odd");
  if (b.defined()) require(b.numel() == ws.n, "conv2d: bias size must equal output channels");

  ConvGeom g{xs.c, xs.h, xs.w, ws.h, ws.w,
             conv_out_size(xs.h, ws.h, stride, pad, dilation),
             conv_out_size(xs.w, ws.w, stride, pad, dilation),
             stride, pad, dilation};
  const int64_t cout = ws.n, k = g.k(), p = g.p();
  Tensor out({xs.n, cout, g.hout, g.wout});

  FloatBuffer col(g.pointwise() ? 0 : static_cast<size_t>(k * p));
  ConstMapMat wm(w.ptr(), cout, k);
  for (int64_t n = 0; n < xs.n; ++n) {
    const float* xn = x.ptr() + n * xs.c * xs.h * xs.w;
    const float* src = xn;
    if (!g.pointwise()) {
      im2col(xn, g, col.data());
      src = col.data();
    }
    MapMat y(out.ptr() + n * cout * p, cout, p);
    y.noalias() = wm * ConstMapMat(src, k, p);
    if (b.defined()) {
      for (int64_t co = 0; co < cout; ++co) y.row(co).array() += b.data()[co];
    }
  }
  MacCounter::add(xs.n * cout * p * k);

  if (recording(x, w, b)) {
    record("conv2d", {x, w, b}, out, [x, w, b, g, cout](const Tensor& o) mutable {
      const int64_t k = g.k(), p = g.p();
      const int64_t n_batch = x.shape().n;
      FloatBuffer col(static_cast<size_t>(k * p));
      ConstMapMat wm(w.ptr(), cout, k);
      for (int64_t n = 0; n < n_batch; ++n) {
        ConstMapMat dy(o.grad().data() + n * cout * p, cout, p);
        const float* xn = x.ptr() + n * g.cin * g.h * g.w;
        if (wants_grad(w)) {
          const float* src = xn;
          if (!g.pointwise()) {
            im2col(xn, g, col.data());
            src = col.data();
          }
          MapMat dw(w.grad().data(), cout, k);
          dw.noalias() += dy * ConstMapMat(src, k, p).transpose();
        }
        if (wants_grad(b)) {
          auto db = b.grad();
          for (int64_t co = 0; co < cout; ++co) db[co] += dy.row(co).sum();
        }
        if (wants_grad(x)) {
          float* dxn = x.grad().data() + n * g.cin * g.h * g.w;
          if (g.pointwise()) {
            MapMat dx(dxn, k, p);
            dx.noalias() += wm.transpose() * dy;
          } else {
            MapMat dcol(col.data(), k, p);
            dcol.noalias() = wm.transpose() * dy;
            col2im_add(col.data(), g, dxn);
          }
        }
      }
    });
  }
  return out;
}

Tensor max_pool2d(const Tensor& x, int k, int stride) {
  const Shape& s = x.shape();
  require(k >= 1 && stride >= 1, "max_pool2d: k and stride must be >= 1");
  require(k <= s.h && k <= s.w, "max_pool2d: window " + std::to_string(k) + " exceeds input " + s.str());
  if (k == stride) {
    require(s.h % stride == 0 && s.w % stride == 0,
            "max_pool2d: input " + s.str() + " not divisible by stride " + std::to_string(stride));
  }
  const int64_t ho = (s.h - k) / stride + 1, wo = (s.w - k) / stride + 1;
  Tensor out({s.n, s.c, ho, wo});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
  const float* xp = x.ptr();
  float* op = out.ptr();
  PatternScope* pin = PatternScope::current();
  int64_t idx = 0;
  for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const int64_t base = nc * s.h * s.w;
    for (int64_t oh = 0; oh < ho; ++oh) {
      for (int64_t ow = 0; ow < wo; ++ow, ++idx) {
        int64_t best = base + oh * stride * s.w + ow * stride;
        for (int64_t i = 0; i < k; ++i) {
          for (int64_t j = 0; j < k; ++j) {
            const int64_t at = base + (oh * stride + i) * s.w + ow * stride + j;
            if (xp[at] > xp[best]) best = at;
          }
        }
        if (pin != nullptr) best = pin->next(best);
        op[idx] = xp[best];
        (*argmax)[static_cast<size_t>(idx)] = best;
      }
    }
  }
  if (recording(x)) {
    record("max_pool2d", {x}, out, [x, argmax](const Tensor& o) mutable {
      auto dx = x.grad();
      auto dy = o.grad();
      for (size_t i = 0; i < argmax->size(); ++i) dx[static_cast<size_t>((*argmax)[i])] += dy[i];
    });
  }
  return out;
}

Tensor upsample_bilinear(const Tensor& x, int64_t out_h, int64_t out_w) {
  const Shape& s = x.shape();
  require(out_h >= s.h && out_w >= s.w,
          "upsample_bilinear: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
              " smaller than input " + s.str());

  struct Tap {
    int64_t i0, i1;
    float frac;
  };
  auto axis = [](int64_t in, int64_t out) {
    std::vector<Tap> taps(static_cast<size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (int64_t d = 0; d < out; ++d) {
      double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
      src = std::max(src, 0.0);
      int64_t i0 = static_cast<int64_t>(std::floor(src));
      i0 = std::min(i0, in - 1);
      const int64_t i1 = std::min(i0 + 1, in - 1);
      taps[static_cast<size_t>(d)] = {i0, i1, static_cast<float>(src - static_cast<double>(i0))};
    }
    return taps;
  };
  auto ty = std::make_shared<std::vector<Tap>>(axis(s.h, out_h));
  auto tx = std::make_shared<std::vector<Tap>>(axis(s.w, out_w));

  Tensor out({s.n, s.c, out_h, out_w});
  const float* xp = x.ptr();
  float* op = out.ptr();
  for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const float* src = xp + nc * s.h * s.w;
    float* dst = op + nc * out_h * out_w;
    for (int64_t oh = 0; oh < out_h; ++oh) {
      const Tap& a = (*ty)[static_cast<size_t>(oh)];
      const float* r0 = src + a.i0 * s.w;
      const float* r1 = src + a.i1 * s.w;
      for (int64_t ow = 0; ow < out_w; ++ow) {
        const Tap& b = (*tx)[static_cast<size_t>(ow)];
        const float top = (1.0f - b.frac) * r0[b.i0] + b.frac * r0[b.i1];
        const float bot = (1.0f - b.frac) * r1[b.i0] + b.frac * r1[b.i1];
        dst[oh * out_w + ow] = (1.0f - a.frac) * top + a.frac * bot;
      }
    }
  }
  if (recording(x)) {
    record("upsample_bilinear", {x}, out, [x, ty, tx](const Tensor& o) mutable {
      const Shape& s = x.shape();
      const Shape& os = o.shape();
      auto dx = x.grad();
      auto dy = o.grad();
      for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
        float* g = dx.data() + nc * s.h * s.w;
        const float* d = dy.data() + nc * os.h * os.w;
        for (int64_t oh = 0; oh < os.h; ++oh) {
          const Tap& a = (*ty)[static_cast<size_t>(oh)];
          for (int64_t ow = 0; ow < os.w; ++ow) {
            const Tap& b = (*tx)[static_cast<size_t>(ow)];
            const float v = d[oh * os.w + ow];
            g[a.i0 * s.w + b.i0] += (1.0f - a.frac) * (1.0f - b.frac) * v;
            g[a.i0 * s.w + b.i1] += (1.0f - a.frac) * b.frac * v;
            g[a.i1 * s.w + b.i0] += a.frac * (1.0f - b.frac) * v;
            g[a.i1 * s.w + b.i1] += a.frac * b.frac * v;
          }
        }
      }
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, float eps, float momentum, bool training) {
  const Shape& s = x.shape();
  require(eps > 0.0f, "batch_norm: eps must be > 0");
  for (const Tensor* t : std::initializer_list<const Tensor*>{&gamma, &beta, &running_mean, &running_var}) {
    require(t->numel() == s.c, "batch_norm: parameter size " + std::to_string(t->numel()) +
                                   " does not match channels " + std::to_string(s.c));
  }
  const int64_t plane = s.plane();
  const int64_t count = s.n * plane;
  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(s.c));
  auto inv = std::make_shared<std::vector<double>>(static_cast<size_t>(s.c));
  const float* xp = x.ptr();
  for (int64_t c = 0; c < s.c; ++c) {
    double m, v;
    if (training) {
      double acc = 0.0;
      for (int64_t n = 0; n < s.n; ++n) {
        const float* p = xp + (n * s.c + c) * plane;
        for (int64_t i = 0; i < plane; ++i) acc += p[i];
      }
      m = acc / static_cast<double>(count);
      double sq = 0.0;
      for (int64_t n = 0; n < s.n; ++n) {
        const float* p = xp + (n * s.c + c) * plane;
        for (int64_t i = 0; i < plane; ++i) sq += (p[i] - m) * (p[i] - m);
      }
      v = sq / static_cast<double>(count);
      float& rm = running_mean.data()[c];
      float& rv = running_var.data()[c];
      rm = static_cast<float>((1.0 - momentum) * rm + momentum * m);
      rv = static_cast<float>((1.0 - momentum) * rv + momentum * v);
    } else {
      m = running_mean.data()[c];
      v = running_var.data()[c];
    }
    (*mean)[static_cast<size_t>(c)] = m;
    (*inv)[static_cast<size_t>(c)] = 1.0 / std::sqrt(v + static_cast<double>(eps));
  }

  Tensor out(s);
  float* op = out.ptr();
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      const double m = (*mean)[static_cast<size_t>(c)], iv = (*inv)[static_cast<size_t>(c)];
      const double ga = gamma.data()[c], be = beta.data()[c];
      const float* p = xp + (n * s.c + c) * plane;
      float* q = op + (n * s.c + c) * plane;
      for (int64_t i = 0; i < plane; ++i) q[i] = static_cast<float>(ga * (p[i] - m) * iv + be);
    }
  }

  if (recording(x, gamma, beta)) {
    record("batch_norm", {x, gamma, beta}, out,
           [x, gamma, beta, mean, inv, training](const Tensor& o) mutable {
             const Shape& s = x.shape();
             const int64_t plane = s.plane();
             const double count = static_cast<double>(s.n * plane);
             auto dy = o.grad();
             const float* xp = x.ptr();
             for (int64_t c = 0; c < s.c; ++c) {
               const double m = (*mean)[static_cast<size_t>(c)], iv = (*inv)[static_cast<size_t>(c)];
               double sum_dy = 0.0, sum_dy_xhat = 0.0;
               for (int64_t n = 0; n < s.n; ++n) {
                 const int64_t off = (n * s.c + c) * plane;
                 for (int64_t i = 0; i < plane; ++i) {
                   const double g = dy[static_cast<size_t>(off + i)];
                   sum_dy += g;
                   sum_dy_xhat += g * (xp[off + i] - m) * iv;
                 }
               }
               if (wants_grad(gamma)) gamma.grad()[c] += static_cast<float>(sum_dy_xhat);
               if (wants_grad(beta)) beta.grad()[c] += static_cast<float>(sum_dy);
               if (!wants_grad(x)) continue;
               const double ga = gamma.data()[c];
               auto dx = x.grad();
               for (int64_t n = 0; n < s.n; ++n) {
                 const int64_t off = (n * s.c + c) * plane;
                 for (int64_t i = 0; i < plane; ++i) {
                   const double g = dy[static_cast<size_t>(off + i)];
                   double d;
                   if (training) {
                     const double xhat = (xp[off + i] - m) * iv;
                     d = ga * iv * (g - sum_dy / count - xhat * sum_dy_xhat / count);
                   } else {
                     d = ga * iv * g;
                   }
                   dx[static_cast<size_t>(off + i)] += static_cast<float>(d);
                 }
               }
             }
           });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  auto xs = x.data();
  auto os = out.data();
  if (PatternScope* pin = PatternScope::current()) {
    for (size_t i = 0; i < xs.size(); ++i) os[i] = pin->next(xs[i] > 0.0f) != 0 ? xs[i] : 0.0f;
  } else {
    for (size_t i = 0; i < xs.size(); ++i) os[i] = xs[i] > 0.0f ? xs[i] : 0.0f;
  }
  if (recording(x)) {
    record("relu", {x}, out, [x](const Tensor& o) mutable {
      auto dx = x.grad();
      auto dy = o.grad();
      auto xs = x.data();
      for (size_t i = 0; i < dx.size(); ++i) {
        if (xs[i] > 0.0f) dx[i] += dy[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  auto xs = x.data();
  auto os = out.data();
  for (size_t i = 0; i < xs.size(); ++i) os[i] = sigmoid_scalar(xs[i]);
  if (recording(x)) {
    record("sigmoid", {x}, out, [x](const Tensor& o) mutable {
      auto dx = x.grad();
      auto dy = o.grad();
      auto ys = o.data();
      for (size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * ys[i] * (1.0f - ys[i]);
    });
  }
  return out;
}

Tensor activation(const Tensor& x, Activation kind) {
  return kind == Activation::relu ? relu(x) : sigmoid(x);
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape& s = x.shape();
  const int64_t plane = s.plane();
  Tensor out({s.n, s.c, 1, 1});
  for (int64_t nc = 0; nc < s.n * s.c; ++nc) {
    const float* p = x.ptr() + nc * plane;
    double acc = 0.0;
    for (int64_t i = 0; i < plane; ++i) acc += p[i];
    out.data()[nc] = static_cast<float>(acc / static_cast<double>(plane));
  }
  if (recording(x)) {
    record("global_avg_pool", {x}, out, [x, plane](const Tensor& o) mutable {
      auto dx = x.grad();
      auto dy = o.grad();
      const float inv = 1.0f / static_cast<float>(plane);
      for (size_t nc = 0; nc < dy.size(); ++nc) {
        const float g = dy[nc] * inv;
        for (int64_t i = 0; i < plane; ++i) dx[nc * plane + i] += g;
      }
    });
  }
  return out;
}

Tensor channel_pool(const Tensor& x, ChannelPool mode) {
  const Shape& s = x.shape();
  const int64_t plane = s.plane();
  Tensor out({s.n, 1, s.h, s.w});
  auto argmax = std::make_shared<std::vector<int64_t>>();
  if (mode == ChannelPool::max) argmax->resize(static_cast<size_t>(out.numel()));
  const float* xp = x.ptr();
  PatternScope* pin = PatternScope::current();
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t i = 0; i < plane; ++i) {
      const int64_t o = n * plane + i;
      if (mode == ChannelPool::avg) {
        double acc = 0.0;
        for (int64_t c = 0; c < s.c; ++c) acc += xp[(n * s.c + c) * plane + i];
        out.data()[o] = static_cast<float>(acc / static_cast<double>(s.c));
      } else {
        int64_t best = n * s.c * plane + i;
        for (int64_t c = 1; c < s.c; ++c) {
          const int64_t at = (n * s.c + c) * plane + i;
          if (xp[at] > xp[best]) best = at;
        }
        if (pin != nullptr) best = pin->next(best);
        out.data()[o] = xp[best];
        (*argmax)[static_cast<size_t>(o)] = best;
      }
    }
  }
  if (recording(x)) {
    const char* name = mode == ChannelPool::avg ? "channel_pool_avg" : "channel_pool_max";
    record(name, {x}, out, [x, mode, argmax](const Tensor& o) mutable {
      const Shape& s = x.shape();
      const int64_t plane = s.plane();
      auto dx = x.grad();
      auto dy = o.grad();
      if (mode == ChannelPool::max) {
        for (size_t i = 0; i < argmax->size(); ++i) dx[static_cast<size_t>((*argmax)[i])] += dy[i];
        return;
      }
      const float inv = 1.0f / static_cast<float>(s.c);
      for (int64_t n = 0; n < s.n; ++n) {
        for (int64_t c = 0; c < s.c; ++c) {
          for (int64_t i = 0; i < plane; ++i) {
            dx[static_cast<size_t>((n * s.c + c) * plane + i)] += dy[static_cast<size_t>(n * plane + i)] * inv;
          }
        }
      }
    });
  }
  return out;
}

Tensor mul_broadcast(const Tensor& x, const Tensor& a) {
  const Shape& xs = x.shape();
  const Shape& as = a.shape();
  enum class Mode { exact, channel, spatial };
  Mode mode;
  if (as == xs) {
    mode = Mode::exact;
  } else if (as.n == xs.n && as.c == 1 && as.h == xs.h && as.w == xs.w) {
    mode = Mode::channel;
  } else if (as.n == xs.n && as.c == xs.c && as.h == 1 && as.w == 1) {
    mode = Mode::spatial;
  } else {
    throw ShapeError("mul_broadcast: cannot broadcast " + as.str() + " onto " + xs.str());
  }
  const int64_t plane = xs.plane();
  auto a_index = [mode, plane, c = xs.c](int64_t n, int64_t ch, int64_t i) -> int64_t {
    switch (mode) {
      case Mode::exact: return (n * c + ch) * plane + i;
      case Mode::channel: return n * plane + i;
      case Mode::spatial: return n * c + ch;
    }
    return 0;
  };
  Tensor out(xs);
  for (int64_t n = 0; n < xs.n; ++n) {
    for (int64_t c = 0; c < xs.c; ++c) {
      for (int64_t i = 0; i < plane; ++i) {
        const int64_t at = (n * xs.c + c) * plane + i;
        out.data()[at] = x.data()[at] * a.data()[a_index(n, c, i)];
      }
    }
  }
  if (recording(x, a)) {
    record("mul_broadcast", {x, a}, out, [x, a, a_index](const Tensor& o) mutable {
      const Shape& xs = x.shape();
      const int64_t plane = xs.plane();
      auto dy = o.grad();
      const bool gx = wants_grad(x), ga = wants_grad(a);
      for (int64_t n = 0; n < xs.n; ++n) {
        for (int64_t c = 0; c < xs.c; ++c) {
          for (int64_t i = 0; i < plane; ++i) {
            const int64_t at = (n * xs.c + c) * plane + i;
            const int64_t ai = a_index(n, c, i);
            if (gx) x.grad()[at] += dy[at] * a.data()[ai];
            if (ga) a.grad()[ai] += dy[at] * x.data()[at];
          }
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(std::initializer_list<Tensor> xs) {
  return concat_channels(std::span<const Tensor>(xs.begin(), xs.size()));
}

Tensor concat_channels(std::span<const Tensor> xs) {
  require(!xs.empty(), "concat_channels: empty input list");
  const Shape& s0 = xs[0].shape();
  int64_t channels = 0;
  for (const Tensor& t : xs) {
    const Shape& s = t.shape();
    require(s.n == s0.n && s.h == s0.h && s.w == s0.w,
            "concat_channels: " + s.str() + " does not match " + s0.str() + " on N,H,W");
    channels += s.c;
  }
  const int64_t plane = s0.plane();
  Tensor out({s0.n, channels, s0.h, s0.w});
  for (int64_t n = 0; n < s0.n; ++n) {
    float* dst = out.ptr() + n * channels * plane;
    for (const Tensor& t : xs) {
      const int64_t block = t.shape().c * plane;
      std::copy_n(t.ptr() + n * block, block, dst);
      dst += block;
    }
  }
  bool any = false;
  for (const Tensor& t : xs) any = any || recording(t);
  if (any) {
    std::vector<Tensor> inputs(xs.begin(), xs.end());
    record("concat_channels", inputs, out, [inputs, channels, plane](const Tensor& o) mutable {
      auto dy = o.grad();
      const int64_t batch = o.shape().n;
      int64_t offset = 0;
      for (Tensor& t : inputs) {
        const int64_t block = t.shape().c * plane;
        if (wants_grad(t)) {
          auto dx = t.grad();
          for (int64_t n = 0; n < batch; ++n) {
            const float* src = dy.data() + n * channels * plane + offset;
            float* dst = dx.data() + n * block;
            for (int64_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        offset += block;
      }
    });
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int64_t begin, int64_t count) {
  const Shape& s = x.shape();
  require(begin >= 0 && count >= 1 && begin + count <= s.c,
          "slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
              ") outside " + std::to_string(s.c) + " channels");
  const int64_t plane = s.plane();
  Tensor out({s.n, count, s.h, s.w});
  for (int64_t n = 0; n < s.n; ++n) {
    std::copy_n(x.ptr() + (n * s.c + begin) * plane, count * plane, out.ptr() + n * count * plane);
  }
  if (recording(x)) {
    record("slice_channels", {x}, out, [x, begin, count](const Tensor& o) mutable {
      const Shape& s = x.shape();
      const int64_t plane = s.plane();
      auto dx = x.grad();
      auto dy = o.grad();
      for (int64_t n = 0; n < s.n; ++n) {
        float* dst = dx.data() + (n * s.c + begin) * plane;
        const float* src = dy.data() + n * count * plane;
        for (int64_t i = 0; i < count * plane; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  require(xs.h == 1 && xs.w == 1, "linear: input must be [N,C,1,1], got " + xs.str());
  require(ws.h == 1 && ws.w == 1, "linear: weight must be [Cout,C,1,1], got " + ws.str());
  require(ws.c == xs.c, "linear: input has " + std::to_string(xs.c) + " features, weight expects " +
                            std::to_string(ws.c));
  if (b.defined()) require(b.numel() == ws.n, "linear: bias size must equal output features");
  const int64_t cin = xs.c, cout = ws.n;
  Tensor out({xs.n, cout, 1, 1});
  for (int64_t n = 0; n < xs.n; ++n) {
    for (int64_t o = 0; o < cout; ++o) {
      double acc = b.defined() ? b.data()[o] : 0.0;
      for (int64_t c = 0; c < cin; ++c) acc += static_cast<double>(w.data()[o * cin + c]) * x.data()[n * cin + c];
      out.data()[n * cout + o] = static_cast<float>(acc);
    }
  }
  MacCounter::add(xs.n * cout * cin);
  if (recording(x, w, b)) {
    record("linear", {x, w, b}, out, [x, w, b, cin, cout](const Tensor& o) mutable {
      auto dy = o.grad();
      const int64_t batch = x.shape().n;
      for (int64_t n = 0; n < batch; ++n) {
        for (int64_t oc = 0; oc < cout; ++oc) {
          const float g = dy[static_cast<size_t>(n * cout + oc)];
          if (wants_grad(b)) b.grad()[oc] += g;
          for (int64_t c = 0; c < cin; ++c) {
            if (wants_grad(w)) w.grad()[oc * cin + c] += g * x.data()[n * cin + c];
            if (wants_grad(x)) x.grad()[n * cin + c] += g * w.data()[oc * cin + c];
          }
        }
      }
    });
  }
  return out;
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
  require(pred.shape() == target.shape(),
          "bce_loss: prediction " + pred.shape().str() + " vs target " + target.shape().str());
  auto p = pred.data();
  auto t = target.data();
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kBceClamp, 1.0f - kBceClamp);
    acc -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
  }
  const double count = static_cast<double>(p.size());
  Tensor out = Tensor::scalar(static_cast<float>(acc / count));
  if (recording(pred, target)) {
    // The clamp only guards the logarithm; its derivative is taken as the
    // identity so saturated predictions still receive a gradient.
    record("bce_loss", {pred, target}, out, [pred, target, count](const Tensor& o) mutable {
      const double g = o.grad()[0] / count;
      auto p = pred.data();
      auto t = target.data();
      for (size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(p[i], kBceClamp, 1.0f - kBceClamp);
        if (wants_grad(pred)) pred.grad()[i] += static_cast<float>(g * (pc - t[i]) / (pc * (1.0 - pc)));
        if (wants_grad(target)) target.grad()[i] += static_cast<float>(g * (std::log(1.0 - pc) - std::log(pc)));
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: " + a.shape().str() + " vs " + b.shape().str());
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (recording(a, b)) {
    record("add", {a, b}, out, [a, b](const Tensor& o) mutable {
      auto dy = o.grad();
      if (wants_grad(a)) {
        auto da = a.grad();
        for (size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
      }
      if (wants_grad(b)) {
        auto db = b.grad();
        for (size_t i = 0; i < dy.size(); ++i) db[i] += dy[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: " + a.shape().str() + " vs " + b.shape().str());
  return mul_broadcast(a, b);
}

Tensor scale(const Tensor& x, float s) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = x.data()[i] * s;
  if (recording(x)) {
    record("scale", {x}, out, [x, s](const Tensor& o) mutable {
      auto dx = x.grad();
      auto dy = o.grad();
      for (size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * s;
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& x, float s) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = x.data()[i] + s;
  if (recording(x)) {
    record("add_scalar", {x}, out, [x](const Tensor& o) mutable {
      auto dx = x.grad();
      auto dy = o.grad();
      for (size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

Tensor abs(const Tensor& x) {
  Tensor out(x.shape());
  PatternScope* pin = PatternScope::current();
  for (int64_t i = 0; i < out.numel(); ++i) {
    const float v = x.data()[i];
    const int64_t sign = pin != nullptr ? pin->next(v > 0.0f ? 1 : (v < 0.0f ? -1 : 0)) : 0;
    out.data()[i] = pin != nullptr ? static_cast<float>(sign) * v : std::fabs(v);
  }
  if (recording(x)) {
    record("abs", {x}, out, [x](const Tensor& o) mutable {
      auto dx = x.grad();
      auto dy = o.grad();
      auto xs = x.data();
      for (size_t i = 0; i < dy.size(); ++i) {
        dx[i] += xs[i] > 0.0f ? dy[i] : (xs[i] < 0.0f ? -dy[i] : 0.0f);
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  if (recording(x)) {
    record("sum", {x}, out, [x](const Tensor& o) mutable {
      const float g = o.grad()[0];
      for (float& d : x.grad()) d += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / static_cast<float>(x.numel())); }

}  // namespace uiu::ops
