// SPDX-License-Identifier: Apache-2.0
//
// Forward and backward kernels for the building blocks of the tracking
// backbone. All tensors are NCHW.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <vector>

#include "motrack/tensor.hpp"

namespace motrack::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
using RowStrideMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// 3x3 convolutions work on a zero-padded copy of the input with row width
// w+2. Output position q = y*(w+2)+x reads padded element q + ky*(w+2) + kx,
// so every kernel tap is one GEMM over a contiguous column range. The two
// extra columns per output row are discarded.
struct PaddedGeometry {
  int h, w, wp, len, padded;
  PaddedGeometry(int h_, int w_)
      : h(h_), w(w_), wp(w_ + 2), len(h_ * (w_ + 2)), padded((h_ + 2) * (w_ + 2) + 2) {}
  int offset(int tap) const { return (tap / 3) * wp + tap % 3; }
};

template <typename T>
void pad_sample(const T* in, int channels, const PaddedGeometry& g, T* out) {
  std::fill(out, out + static_cast<std::size_t>(channels) * g.padded, T(0));
  for (int ch = 0; ch < channels; ++ch)
    for (int y = 0; y < g.h; ++y)
      std::copy(in + (ch * g.h + y) * g.w, in + (ch * g.h + y + 1) * g.w,
                out + static_cast<std::size_t>(ch) * g.padded + (y + 1) * g.wp + 1);
}

// [cout][cin][3][3] -> nine contiguous cout x cin matrices.
template <typename T>
std::vector<RowMat<T>> split_taps(const T* weight, int cout, int cin) {
  std::vector<RowMat<T>> taps(9, RowMat<T>(cout, cin));
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci)
      for (int tap = 0; tap < 9; ++tap) taps[tap](co, ci) = weight[(co * cin + ci) * 9 + tap];
  return taps;
}

/// Convolution with square kernel of size 1 or 3 ("same" output size).
/// weight layout: [cout][cin][k][k]; bias may be null.
template <typename T>
void conv_forward(const Tensor<T>& in, const T* weight, const T* bias, int cout,
                  int ksize, Tensor<T>& out, AlignedVector<T>& scratch) {
  const int cin = in.c;
  const int hw = in.h * in.w;
  out = Tensor<T>(in.n, cout, in.h, in.w);
  if (ksize == 1) {
    ConstMatMap<T> wmat(weight, cout, cin);
    for (int i = 0; i < in.n; ++i) {
      MatMap<T> o(out.sample(i), cout, hw);
      o.noalias() = wmat * ConstMatMap<T>(in.sample(i), cin, hw);
      if (bias)
        for (int co = 0; co < cout; ++co) o.row(co).array() += bias[co];
    }
    return;
  }
  const PaddedGeometry g(in.h, in.w);
  const auto taps = split_taps(weight, cout, cin);
  scratch.resize(static_cast<std::size_t>(cin) * g.padded);
  RowMat<T> acc(cout, g.len);
  for (int i = 0; i < in.n; ++i) {
    pad_sample(in.sample(i), cin, g, scratch.data());
    for (int tap = 0; tap < 9; ++tap) {
      RowStrideMap<T> xk(scratch.data() + g.offset(tap), cin, g.len, Eigen::OuterStride<>(g.padded));
      if (tap == 0) acc.noalias() = taps[tap] * xk;
      else acc.noalias() += taps[tap] * xk;
    }
    for (int co = 0; co < cout; ++co) {
      T* dst = out.plane(i, co);
      const T b = bias ? bias[co] : T(0);
      const T* src = acc.data() + static_cast<std::size_t>(co) * g.len;
      for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) dst[y * in.w + x] = src[y * g.wp + x] + b;
    }
  }
}

/// Accumulates weight/bias gradients; writes the input gradient when din is
/// non-null.
template <typename T>
void conv_backward(const Tensor<T>& in, const T* weight, const Tensor<T>& dout,
                   int ksize, T* dweight, T* dbias, Tensor<T>* din,
                   AlignedVector<T>& scratch) {
  const int cin = in.c;
  const int cout = dout.c;
  const int hw = in.h * in.w;
  if (din) *din = Tensor<T>(in.n, cin, in.h, in.w);
  if (ksize == 1) {
    ConstMatMap<T> wmat(weight, cout, cin);
    MatMap<T> dw(dweight, cout, cin);
    for (int i = 0; i < in.n; ++i) {
      ConstMatMap<T> gm(dout.sample(i), cout, hw);
      dw.noalias() += gm * ConstMatMap<T>(in.sample(i), cin, hw).transpose();
      if (dbias)
        for (int co = 0; co < cout; ++co) dbias[co] += gm.row(co).sum();
      if (din) MatMap<T>(din->sample(i), cin, hw).noalias() = wmat.transpose() * gm;
    }
    return;
  }
  const PaddedGeometry g(in.h, in.w);
  std::vector<RowMat<T>> taps;
  if (din) taps = split_taps(weight, cout, cin);
  std::vector<RowMat<T>> dtaps(9, RowMat<T>::Zero(cout, cin));
  scratch.resize(static_cast<std::size_t>(cin) * g.padded);
  RowMat<T> gpad = RowMat<T>::Zero(cout, g.len);
  RowMat<T> dpad;
  if (din) dpad.resize(cin, g.padded);
  for (int i = 0; i < in.n; ++i) {
    pad_sample(in.sample(i), cin, g, scratch.data());
    for (int co = 0; co < cout; ++co) {
      const T* src = dout.plane(i, co);
      T* dst = gpad.data() + static_cast<std::size_t>(co) * g.len;
      for (int y = 0; y < in.h; ++y)
        std::copy(src + y * in.w, src + (y + 1) * in.w, dst + y * g.wp);
      if (dbias) dbias[co] += gpad.row(co).sum();
    }
    if (din) dpad.setZero();
    for (int tap = 0; tap < 9; ++tap) {
      RowStrideMap<T> xk(scratch.data() + g.offset(tap), cin, g.len, Eigen::OuterStride<>(g.padded));
      dtaps[tap].noalias() += gpad * xk.transpose();
      if (din) dpad.middleCols(g.offset(tap), g.len).noalias() += taps[tap].transpose() * gpad;
    }
    if (din) {
      for (int ch = 0; ch < cin; ++ch) {
        T* dst = din->plane(i, ch);
        const T* src = dpad.data() + static_cast<std::size_t>(ch) * g.padded;
        for (int y = 0; y < in.h; ++y)
          std::copy(src + (y + 1) * g.wp + 1, src + (y + 1) * g.wp + 1 + in.w, dst + y * in.w);
      }
    }
  }
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci)
      for (int tap = 0; tap < 9; ++tap) dweight[(co * cin + ci) * 9 + tap] += dtaps[tap](co, ci);
}

/// Per-channel normalization state kept for the backward pass.
template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
  bool training = false;
};

template <typename T>
void batchnorm_forward(Tensor<T>& x, const T* gamma, const T* beta, T* running_mean,
                       T* running_var, bool training, BatchNormCache<T>& cache,
                       T momentum = T(0.1), T eps = T(1e-5)) {
  const std::size_t plane = x.plane_size();
  const std::size_t count = plane * x.n;
  cache.training = training;
  cache.inv_std.assign(x.c, T(0));
  cache.xhat = Tensor<T>(x.n, x.c, x.h, x.w);
  for (int ch = 0; ch < x.c; ++ch) {
    T mean, var;
    if (training) {
      double sum = 0.0;
      for (int i = 0; i < x.n; ++i) {
        const T* p = x.plane(i, ch);
        for (std::size_t k = 0; k < plane; ++k) sum += p[k];
      }
      const double m = sum / static_cast<double>(count);
      double sq = 0.0;
      for (int i = 0; i < x.n; ++i) {
        const T* p = x.plane(i, ch);
        for (std::size_t k = 0; k < plane; ++k) {
          const double d = p[k] - m;
          sq += d * d;
        }
      }
      mean = static_cast<T>(m);
      var = static_cast<T>(sq / static_cast<double>(count));
      const T unbiased = count > 1 ? static_cast<T>(sq / static_cast<double>(count - 1)) : var;
      running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mean;
      running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * unbiased;
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    const T inv = T(1) / std::sqrt(var + eps);
    cache.inv_std[ch] = inv;
    for (int i = 0; i < x.n; ++i) {
      T* p = x.plane(i, ch);
      T* xh = cache.xhat.plane(i, ch);
      for (std::size_t k = 0; k < plane; ++k) {
        xh[k] = (p[k] - mean) * inv;
        p[k] = gamma[ch] * xh[k] + beta[ch];
      }
    }
  }
}

/// In-place: dy becomes dx. Accumulates dgamma/dbeta.
template <typename T>
void batchnorm_backward(Tensor<T>& dy, const T* gamma, const BatchNormCache<T>& cache,
                        T* dgamma, T* dbeta) {
  const std::size_t plane = dy.plane_size();
  const double count = static_cast<double>(plane * dy.n);
  for (int ch = 0; ch < dy.c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < dy.n; ++i) {
      const T* g = dy.plane(i, ch);
      const T* xh = cache.xhat.plane(i, ch);
      for (std::size_t k = 0; k < plane; ++k) {
        sum_dy += g[k];
        sum_dy_xhat += g[k] * xh[k];
      }
    }
    dgamma[ch] += static_cast<T>(sum_dy_xhat);
    dbeta[ch] += static_cast<T>(sum_dy);
    const T inv = cache.inv_std[ch];
    const T gm = gamma[ch];
    if (cache.training) {
      const T mean_dy = static_cast<T>(sum_dy / count);
      const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
      for (int i = 0; i < dy.n; ++i) {
        T* g = dy.plane(i, ch);
        const T* xh = cache.xhat.plane(i, ch);
        for (std::size_t k = 0; k < plane; ++k)
          g[k] = gm * inv * (g[k] - mean_dy - xh[k] * mean_dy_xhat);
      }
    } else {
      for (int i = 0; i < dy.n; ++i) {
        T* g = dy.plane(i, ch);
        for (std::size_t k = 0; k < plane; ++k) g[k] *= gm * inv;
      }
    }
  }
}

template <typename T>
void relu_forward(Tensor<T>& x) {
  for (auto& v : x.data) v = v > T(0) ? v : T(0);
}

/// Uses the forward output as the mask.
template <typename T>
void relu_backward(const Tensor<T>& y, Tensor<T>& dy) {
  for (std::size_t k = 0; k < dy.size(); ++k)
    if (!(y.data[k] > T(0))) dy.data[k] = T(0);
}

/// 2x2 max pooling, stride 2. argmax stores the flat source index per output.
template <typename T>
void maxpool2_forward(const Tensor<T>& in, Tensor<T>& out, std::vector<std::int32_t>& argmax) {
  const int oh = in.h / 2, ow = in.w / 2;
  out = Tensor<T>(in.n, in.c, oh, ow);
  argmax.resize(out.size());
  std::size_t o = 0;
  for (int i = 0; i < in.n; ++i) {
    for (int ch = 0; ch < in.c; ++ch) {
      const T* p = in.plane(i, ch);
      const std::int32_t base = static_cast<std::int32_t>(p - in.data.data());
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x, ++o) {
          int best = (2 * y) * in.w + 2 * x;
          const int cand[3] = {best + 1, best + in.w, best + in.w + 1};
          for (int c : cand)
            if (p[c] > p[best]) best = c;
          out.data[o] = p[best];
          argmax[o] = base + best;
        }
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const Tensor<T>& dout, const std::vector<std::int32_t>& argmax,
                       Tensor<T>& din) {
  din.zero();
  for (std::size_t o = 0; o < dout.size(); ++o) din.data[argmax[o]] += dout.data[o];
}

/// Nearest-neighbour 2x upsampling.
template <typename T>
void upsample2_forward(const Tensor<T>& in, Tensor<T>& out) {
  out = Tensor<T>(in.n, in.c, in.h * 2, in.w * 2);
  for (int i = 0; i < in.n; ++i)
    for (int ch = 0; ch < in.c; ++ch) {
      const T* p = in.plane(i, ch);
      T* q = out.plane(i, ch);
      for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) q[y * out.w + x] = p[(y / 2) * in.w + x / 2];
    }
}

template <typename T>
void upsample2_backward(const Tensor<T>& dout, Tensor<T>& din) {
  din = Tensor<T>(dout.n, dout.c, dout.h / 2, dout.w / 2);
  for (int i = 0; i < dout.n; ++i)
    for (int ch = 0; ch < dout.c; ++ch) {
      const T* g = dout.plane(i, ch);
      T* d = din.plane(i, ch);
      for (int y = 0; y < dout.h; ++y)
        for (int x = 0; x < dout.w; ++x) d[(y / 2) * din.w + x / 2] += g[y * dout.w + x];
    }
}

/// Channel concatenation [a, b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy(a.sample(i), a.sample(i) + a.sample_size(), out.sample(i));
    std::copy(b.sample(i), b.sample(i) + b.sample_size(), out.sample(i) + a.sample_size());
  }
  return out;
}

/// Inverse of concat_channels for gradients.
template <typename T>
void split_channels(const Tensor<T>& g, int first_c, Tensor<T>& ga, Tensor<T>& gb) {
  ga = Tensor<T>(g.n, first_c, g.h, g.w);
  gb = Tensor<T>(g.n, g.c - first_c, g.h, g.w);
  for (int i = 0; i < g.n; ++i) {
    std::copy(g.sample(i), g.sample(i) + ga.sample_size(), ga.sample(i));
    std::copy(g.sample(i) + ga.sample_size(), g.sample(i) + g.sample_size(), gb.sample(i));
  }
}

}  // namespace motrack::nn
