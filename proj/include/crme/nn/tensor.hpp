#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "crme/core/error.hpp"

namespace crme::nn {

/// 64-byte aligned storage. Eigen's vectorized reductions split work by the
/// operand address, so a fixed alignment keeps results bit-identical run to
/// run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense NCHW batch of feature maps.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T{})
      : n_(n), c_(c), h_(h), w_(w),
        data_(static_cast<std::size_t>(n) * c * h * w, fill) {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw ShapeError("negative tensor dimension");
  }

  int n() const noexcept { return n_; }
  int c() const noexcept { return c_; }
  int h() const noexcept { return h_; }
  int w() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h_) * w_; }
  std::size_t sample_size() const noexcept { return plane() * c_; }
  std::array<int, 4> shape() const noexcept { return {n_, c_, h_, w_}; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T* sample(int i) noexcept { return data_.data() + static_cast<std::size_t>(i) * sample_size(); }
  const T* sample(int i) const noexcept {
    return data_.data() + static_cast<std::size_t>(i) * sample_size();
  }
  T* channel(int i, int ch) noexcept { return sample(i) + static_cast<std::size_t>(ch) * plane(); }
  const T* channel(int i, int ch) const noexcept {
    return sample(i) + static_cast<std::size_t>(ch) * plane();
  }

  T& operator()(int i, int ch, int y, int x) noexcept {
    return channel(i, ch)[static_cast<std::size_t>(y) * w_ + x];
  }
  const T& operator()(int i, int ch, int y, int x) const noexcept {
    return channel(i, ch)[static_cast<std::size_t>(y) * w_ + x];
  }

  bool same_shape(const Tensor& o) const noexcept { return shape() == o.shape(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  AlignedVector<T> data_;
};

template <class T>
std::string shape_string(const Tensor<T>& t) {
  return "[" + std::to_string(t.n()) + ", " + std::to_string(t.c()) + ", " + std::to_string(t.h()) +
         ", " + std::to_string(t.w()) + "]";
}

template <class T>
void require_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace crme::nn
