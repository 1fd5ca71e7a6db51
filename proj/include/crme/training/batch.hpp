#pragma once

#include <span>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/grid.hpp"
#include "crme/dataset/record.hpp"
#include "crme/nn/tensor.hpp"

namespace crme::training {

/// One record converted to network precision: [2, H, W] input, [1, H, W] label.
template <class T>
struct Example {
  std::vector<T> input;
  std::vector<T> label;
  int height = 0;
  int width = 0;
};

template <class T>
Example<T> to_example(const dataset::SampleRecord& rec) {
  Example<T> e;
  e.height = rec.height();
  e.width = rec.width();
  const std::size_t plane = static_cast<std::size_t>(e.height) * e.width;
  e.input.resize(2 * plane);
  e.label.resize(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    e.input[i] = static_cast<T>(rec.rss.values()[i]);
    e.input[plane + i] = static_cast<T>(rec.map.values()[i]);
    e.label[i] = static_cast<T>(rec.label.grid().values()[i]);
  }
  return e;
}

template <class T>
std::vector<Example<T>> to_examples(std::span<const dataset::SampleRecord> records) {
  std::vector<Example<T>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(to_example<T>(r));
  return out;
}

template <class T>
struct Batch {
  nn::Tensor<T> input;
  nn::Tensor<T> label;
};

template <class T>
Batch<T> make_batch(std::span<const Example<T>> examples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ValidationError("empty batch");
  const auto& first = examples[indices[0]];
  Batch<T> b{nn::Tensor<T>(static_cast<int>(indices.size()), 2, first.height, first.width),
             nn::Tensor<T>(static_cast<int>(indices.size()), 1, first.height, first.width)};
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& e = examples[indices[k]];
    if (e.height != first.height || e.width != first.width) throw ShapeError("batch mixes map sizes");
    std::copy(e.input.begin(), e.input.end(), b.input.sample(static_cast<int>(k)));
    std::copy(e.label.begin(), e.label.end(), b.label.sample(static_cast<int>(k)));
  }
  return b;
}

template <class T>
nn::Tensor<T> input_tensor(const dataset::SampleRecord& rec) {
  const auto e = to_example<T>(rec);
  nn::Tensor<T> x(1, 2, e.height, e.width);
  std::copy(e.input.begin(), e.input.end(), x.data());
  return x;
}

template <class T>
Grid<double> tensor_to_grid(const nn::Tensor<T>& t, int sample = 0, int channel = 0) {
  std::vector<double> v(t.plane());
  const T* p = t.channel(sample, channel);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(p[i]);
  return Grid<double>(t.w(), t.h(), std::move(v));
}

}  // namespace crme::training
