#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "crme/nn/tensor.hpp"

namespace crme::nn {

/// 2-D convolution geometry. Padding may differ per side so that an even
/// kernel at stride 1 can keep the resolution (pad_lo = k/2 - 1, pad_hi = k/2).
struct ConvShape {
  int cin = 1;
  int cout = 1;
  int kernel = 3;
  int stride = 1;
  int pad_lo = 1;
  int pad_hi = 1;

  int out_size(int in) const {
    const int span = in + pad_lo + pad_hi - kernel;
    if (span < 0 || span % stride != 0) {
      throw ShapeError("conv: input size " + std::to_string(in) + " incompatible with kernel " +
                       std::to_string(kernel) + " stride " + std::to_string(stride));
    }
    return span / stride + 1;
  }
  std::size_t weight_count() const {
    return static_cast<std::size_t>(cout) * cin * kernel * kernel;
  }
  std::size_t patch() const { return static_cast<std::size_t>(cin) * kernel * kernel; }

  static ConvShape same(int cin, int cout, int k) { return {cin, cout, k, 1, (k - 1) / 2, k / 2}; }
  static ConvShape halving(int cin, int cout, int k) {
    return {cin, cout, k, 2, (k - 1) / 2, k - 2 - (k - 1) / 2};
  }
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
void im2col(const T* x, int h, int w, const ConvShape& s, int ho, int wo, T* col) {
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < s.cin; ++ci) {
    const T* xc = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < s.kernel; ++ky)
      for (int kx = 0; kx < s.kernel; ++kx) {
        T* row = col + (static_cast<std::size_t>(ci) * s.kernel * s.kernel + ky * s.kernel + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad_lo + ky;
          T* r = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < wo; ++ox) r[ox] = T(0);
            continue;
          }
          const T* xr = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad_lo + kx;
            r[ox] = (ix >= 0 && ix < w) ? xr[ix] : T(0);
          }
        }
      }
  }
}

template <class T>
void col2im_add(const T* col, int h, int w, const ConvShape& s, int ho, int wo, T* dx) {
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < s.cin; ++ci) {
    T* dc = dx + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < s.kernel; ++ky)
      for (int kx = 0; kx < s.kernel; ++kx) {
        const T* row = col + (static_cast<std::size_t>(ci) * s.kernel * s.kernel + ky * s.kernel + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s.stride - s.pad_lo + ky;
          if (iy < 0 || iy >= h) continue;
          const T* r = row + static_cast<std::size_t>(oy) * wo;
          T* dr = dc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * s.stride - s.pad_lo + kx;
            if (ix >= 0 && ix < w) dr[ix] += r[ox];
          }
        }
      }
  }
}

}  // namespace detail

/// y = conv(x, weight) + bias. weight is [cout][cin][k][k], row-major.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias,
                 const ConvShape& s) {
  if (x.c() != s.cin) {
    throw ShapeError("conv: expected " + std::to_string(s.cin) + " input channels, got " +
                     std::to_string(x.c()));
  }
  const int ho = s.out_size(x.h());
  const int wo = s.out_size(x.w());
  Tensor<T> y(x.n(), s.cout, ho, wo);
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  AlignedVector<T> col(s.patch() * p);
  Eigen::Map<const detail::RowMat<T>> wm(weight.data(), s.cout, static_cast<Eigen::Index>(s.patch()));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bv(bias.data(), s.cout);
  for (int i = 0; i < x.n(); ++i) {
    detail::im2col(x.sample(i), x.h(), x.w(), s, ho, wo, col.data());
    Eigen::Map<const detail::RowMat<T>> cm(col.data(), static_cast<Eigen::Index>(s.patch()),
                                           static_cast<Eigen::Index>(p));
    Eigen::Map<detail::RowMat<T>> ym(y.sample(i), s.cout, static_cast<Eigen::Index>(p));
    ym.noalias() = wm * cm;
    ym.colwise() += bv;
  }
  return y;
}

/// Accumulates dL/dweight and dL/dbias; writes dL/dx when dx is non-null.
template <class T>
void conv2d_backward(const Tensor<T>& x, std::span<const T> weight, const ConvShape& s,
                     const Tensor<T>& dy, std::span<T> dweight, std::span<T> dbias, Tensor<T>* dx) {
  const int ho = dy.h();
  const int wo = dy.w();
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  const auto k = static_cast<Eigen::Index>(s.patch());
  AlignedVector<T> col(s.patch() * p);
  Eigen::Map<const detail::RowMat<T>> wm(weight.data(), s.cout, k);
  Eigen::Map<detail::RowMat<T>> dwm(dweight.data(), s.cout, k);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbv(dbias.data(), s.cout);
  if (dx) *dx = Tensor<T>(x.n(), x.c(), x.h(), x.w());
  for (int i = 0; i < x.n(); ++i) {
    Eigen::Map<const detail::RowMat<T>> dym(dy.sample(i), s.cout, static_cast<Eigen::Index>(p));
    detail::im2col(x.sample(i), x.h(), x.w(), s, ho, wo, col.data());
    Eigen::Map<detail::RowMat<T>> cm(col.data(), k, static_cast<Eigen::Index>(p));
    dwm.noalias() += dym * cm.transpose();
    dbv += dym.rowwise().sum();
    if (dx) {
      cm.noalias() = wm.transpose() * dym;
      detail::col2im_add(col.data(), x.h(), x.w(), s, ho, wo, dx->sample(i));
    }
  }
}

// Pointwise activations. Backward passes take the forward *output*.

inline constexpr double kLeakySlope = 0.2;

template <class T>
void leaky_relu_inplace(Tensor<T>& t) {
  for (auto& v : t.values()) v = v > T(0) ? v : T(kLeakySlope) * v;
}

template <class T>
void leaky_relu_backward(const Tensor<T>& y, Tensor<T>& dy) {
  auto yv = y.values();
  auto d = dy.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= yv[i] > T(0) ? T(1) : T(kLeakySlope);
}

template <class T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.values()) v = v > T(0) ? v : T(0);
}

template <class T>
void relu_backward(const Tensor<T>& y, Tensor<T>& dy) {
  auto yv = y.values();
  auto d = dy.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = yv[i] > T(0) ? d[i] : T(0);
}

template <class T>
void sigmoid_inplace(Tensor<T>& t) {
  for (auto& v : t.values()) v = T(1) / (T(1) + std::exp(-v));
}

template <class T>
void sigmoid_backward(const Tensor<T>& y, Tensor<T>& dy) {
  auto yv = y.values();
  auto d = dy.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= yv[i] * (T(1) - yv[i]);
}

/// Mean over non-overlapping factor x factor blocks.
template <class T>
Tensor<T> avg_pool(const Tensor<T>& x, int factor) {
  if (factor < 1 || x.h() % factor != 0 || x.w() % factor != 0) {
    throw ShapeError("avg_pool: factor " + std::to_string(factor) + " does not divide " +
                     shape_string(x));
  }
  if (factor == 1) return x;
  Tensor<T> y(x.n(), x.c(), x.h() / factor, x.w() / factor);
  const T inv = T(1) / T(factor * factor);
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c)
      for (int oy = 0; oy < y.h(); ++oy)
        for (int ox = 0; ox < y.w(); ++ox) {
          T s = 0;
          for (int dy = 0; dy < factor; ++dy)
            for (int dx = 0; dx < factor; ++dx) s += x(i, c, oy * factor + dy, ox * factor + dx);
          y(i, c, oy, ox) = s * inv;
        }
  return y;
}

template <class T>
Tensor<T> avg_pool_backward(const Tensor<T>& dy, int factor) {
  if (factor == 1) return dy;
  Tensor<T> dx(dy.n(), dy.c(), dy.h() * factor, dy.w() * factor);
  const T inv = T(1) / T(factor * factor);
  for (int i = 0; i < dx.n(); ++i)
    for (int c = 0; c < dx.c(); ++c)
      for (int y = 0; y < dx.h(); ++y)
        for (int x = 0; x < dx.w(); ++x) dx(i, c, y, x) = dy(i, c, y / factor, x / factor) * inv;
  return dx;
}

/// Nearest-neighbour 2x upsampling.
template <class T>
Tensor<T> upsample2(const Tensor<T>& x) {
  Tensor<T> y(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c)
      for (int yy = 0; yy < y.h(); ++yy)
        for (int xx = 0; xx < y.w(); ++xx) y(i, c, yy, xx) = x(i, c, yy / 2, xx / 2);
  return y;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.n(), dy.c(), dy.h() / 2, dy.w() / 2);
  for (int i = 0; i < dy.n(); ++i)
    for (int c = 0; c < dy.c(); ++c)
      for (int yy = 0; yy < dy.h(); ++yy)
        for (int xx = 0; xx < dy.w(); ++xx) dx(i, c, yy / 2, xx / 2) += dy(i, c, yy, xx);
  return dx;
}

/// Channel concatenation [a, b].
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("concat: " + shape_string(a) + " vs " + shape_string(b));
  }
  Tensor<T> y(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int i = 0; i < a.n(); ++i) {
    std::copy(a.sample(i), a.sample(i) + a.sample_size(), y.sample(i));
    std::copy(b.sample(i), b.sample(i) + b.sample_size(), y.sample(i) + a.sample_size());
  }
  return y;
}

/// Inverse of concat_channels for gradients: splits off the first `ca` channels.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int ca) {
  Tensor<T> a(y.n(), ca, y.h(), y.w());
  Tensor<T> b(y.n(), y.c() - ca, y.h(), y.w());
  for (int i = 0; i < y.n(); ++i) {
    std::copy(y.sample(i), y.sample(i) + a.sample_size(), a.sample(i));
    std::copy(y.sample(i) + a.sample_size(), y.sample(i) + y.sample_size(), b.sample(i));
  }
  return {std::move(a), std::move(b)};
}

template <class T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a, b, "add");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
}

}  // namespace crme::nn
