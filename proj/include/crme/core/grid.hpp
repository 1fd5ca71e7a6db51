#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crme/core/error.hpp"

namespace crme {

struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Dense row-major 2-D array indexed as (x, y) with x in [0, width) and
/// y in [0, height). Storage offset is y * width + x.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height)) {
      throw ShapeError("grid data size does not match " + std::to_string(width) + "x" +
                       std::to_string(height));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool contains(Cell c) const noexcept { return contains(c.x, c.y); }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
  T& operator[](Cell c) noexcept { return data_[index(c.x, c.y)]; }
  const T& operator[](Cell c) const noexcept { return data_[index(c.x, c.y)]; }

  T& at(int x, int y) {
    check(x, y);
    return data_[index(x, y)];
  }
  const T& at(int x, int y) const {
    check(x, y);
    return data_[index(x, y)];
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  template <class U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  template <class F>
  auto map(F&& f) const -> Grid<std::invoke_result_t<F, const T&>> {
    using R = std::invoke_result_t<F, const T&>;
    std::vector<R> out;
    out.reserve(data_.size());
    for (const auto& v : data_) out.push_back(f(v));
    return Grid<R>(width_, height_, std::move(out));
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w <= 0 || h <= 0) {
      throw ShapeError("grid dimensions must be positive, got " + std::to_string(w) + "x" +
                       std::to_string(h));
    }
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  void check(int x, int y) const {
    if (!contains(x, y)) {
      throw BoundsError("cell (" + std::to_string(x) + ", " + std::to_string(y) +
                        ") outside " + std::to_string(width_) + "x" + std::to_string(height_) +
                        " grid");
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()));
  }
}

// Quarter turn: cell (x, y) of a W x H grid lands at (H - 1 - y, x) of an H x W grid.
inline Cell rotate90(Cell c, int height) noexcept { return {height - 1 - c.y, c.x}; }

template <class T>
Grid<T> rotate90(const Grid<T>& g) {
  Grid<T> out(g.height(), g.width());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) out[rotate90(Cell{x, y}, g.height())] = g(x, y);
  return out;
}

inline Cell mirror_x(Cell c, int width) noexcept { return {width - 1 - c.x, c.y}; }

template <class T>
Grid<T> mirror_x(const Grid<T>& g) {
  Grid<T> out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) out[mirror_x(Cell{x, y}, g.width())] = g(x, y);
  return out;
}

}  // namespace crme
