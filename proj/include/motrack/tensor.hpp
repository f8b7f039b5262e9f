// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace motrack {

/// Error raised when input data violates a documented precondition.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised when a computation produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-byte aligned storage. Vectorized kernels choose their loop peeling from
/// the data address, so a fixed alignment keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense 4-D tensor in NCHW order.
template <typename T>
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  AlignedVector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return plane_size() * c; }

  T* sample(int i) { return data.data() + i * sample_size(); }
  const T* sample(int i) const { return data.data() + i * sample_size(); }

  T* plane(int i, int ch) { return sample(i) + ch * plane_size(); }
  const T* plane(int i, int ch) const { return sample(i) + ch * plane_size(); }

  T& at(int i, int ch, int y, int x) { return plane(i, ch)[y * w + x]; }
  T at(int i, int ch, int y, int x) const { return plane(i, ch)[y * w + x]; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

/// Single-channel real-valued map in row-major order.
template <typename T>
struct Map2D {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Map2D() = default;
  Map2D(int w, int h, T fill = T(0))
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  T operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Map2D& o) const { return width == o.width && height == o.height; }
};

/// Ordered list of equally sized maps (one per frame or per frame pair).
template <typename T>
using MapStack = std::vector<Map2D<T>>;

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DataError(what);
}

}  // namespace motrack
