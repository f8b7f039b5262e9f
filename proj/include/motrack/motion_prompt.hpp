// SPDX-License-Identifier: Apache-2.0
//
// Motion prompt: absolute frame differencing followed by a two-parameter
// shifted logistic ("power normalization") that turns difference magnitudes
// into attention values in (0,1).
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "motrack/frames.hpp"
#include "motrack/tensor.hpp"

namespace motrack {

struct DiffStack {
  MapStack<double> signed_diff;    // gray[t+1] - gray[t], in [-1,1]
  MapStack<double> absolute_diff;  // |signed_diff|, in [0,1]

  int slices() const { return static_cast<int>(absolute_diff.size()); }
};

struct PNParams {
  static constexpr double kMinSlope = 1e-3;

  double slope = 5.0;
  double shift = 0.25;

  void clamp_slope() { slope = std::max(slope, kMinSlope); }
  bool valid() const { return std::isfinite(slope) && std::isfinite(shift) && slope > 0.0; }
};

/// T'-1 attention maps, one per consecutive frame pair.
template <typename T>
using AttentionStack = MapStack<T>;

struct PNGrad {
  double d_slope = 0.0;
  double d_shift = 0.0;
  double d_input = 0.0;
};

inline DiffStack frame_diff(const TemporalBlock& block) {
  require(block.gray.size() >= 2, "frame_diff needs at least two frames");
  DiffStack d;
  const int w = block.gray.front().width, h = block.gray.front().height;
  for (std::size_t t = 0; t + 1 < block.gray.size(); ++t) {
    const Frame& a = block.gray[t];
    const Frame& b = block.gray[t + 1];
    require(a.width == w && a.height == h && b.width == w && b.height == h,
            "frame_diff: frames differ in size");
    Map2D<double> s(w, h), ab(w, h);
    for (std::size_t p = 0; p < s.size(); ++p) {
      s.data[p] = b.data[p] - a.data[p];
      ab.data[p] = std::abs(s.data[p]);
    }
    d.signed_diff.push_back(std::move(s));
    d.absolute_diff.push_back(std::move(ab));
  }
  return d;
}

/// a(d) = 1 / (1 + exp(-slope * (d - shift))), evaluated without overflow.
inline double pn_forward(double d, const PNParams& p) {
  const double z = p.slope * (d - p.shift);
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename T = double>
AttentionStack<T> attention(const DiffStack& diffs, const PNParams& params) {
  AttentionStack<T> out;
  out.reserve(diffs.absolute_diff.size());
  for (const auto& m : diffs.absolute_diff) {
    Map2D<T> a(m.width, m.height);
    for (std::size_t k = 0; k < m.size(); ++k)
      a.data[k] = static_cast<T>(pn_forward(m.data[k], params));
    out.push_back(std::move(a));
  }
  return out;
}

inline PNGrad pn_grad(double d, const PNParams& p, double upstream) {
  const double s = pn_forward(d, p);
  const double ds = s * (1.0 - s);
  return {upstream * ds * (d - p.shift), -upstream * p.slope * ds, upstream * p.slope * ds};
}

/// Parameter gradients summed over every element of the stack.
template <typename T>
PNGrad pn_grad_stack(const DiffStack& diffs, const PNParams& p,
                     const AttentionStack<T>& upstream) {
  PNGrad total;
  for (std::size_t t = 0; t < diffs.absolute_diff.size(); ++t) {
    const auto& d = diffs.absolute_diff[t];
    const auto& g = upstream[t];
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (g.data[k] == T(0)) continue;
      const PNGrad e = pn_grad(d.data[k], p, static_cast<double>(g.data[k]));
      total.d_slope += e.d_slope;
      total.d_shift += e.d_shift;
      total.d_input += e.d_input;
    }
  }
  return total;
}

/// Same as pn_grad_stack, reusing attention values computed in the forward pass.
template <typename T>
PNGrad pn_grad_from_attention(const DiffStack& diffs, const PNParams& p,
                              const AttentionStack<T>& attn, const AttentionStack<T>& upstream) {
  PNGrad total;
  for (std::size_t t = 0; t < diffs.absolute_diff.size(); ++t) {
    const auto& d = diffs.absolute_diff[t];
    const auto& a = attn[t];
    const auto& g = upstream[t];
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double s = static_cast<double>(a.data[k]);
      const double u = static_cast<double>(g.data[k]) * s * (1.0 - s);
      total.d_slope += u * (d.data[k] - p.shift);
      total.d_shift -= u * p.slope;
      total.d_input += u * p.slope;
    }
  }
  return total;
}

}  // namespace motrack
