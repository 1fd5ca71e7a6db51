#pragma once

#include <string>

#include "crme/nn/ops.hpp"
#include "crme/nn/params.hpp"

namespace crme::nn {

/// A learned convolution bound to its weight/bias slots in a ModelParams.
struct ConvLayer {
  std::string name;
  ConvShape shape;
  std::size_t weight = 0;
  std::size_t bias = 0;

  template <class T>
  static ConvLayer declare(ModelParams<T>& params, std::string name, ConvShape shape) {
    ConvLayer l{std::move(name), shape, 0, 0};
    l.weight = params.add(l.name + ".weight", {shape.cout, shape.cin, shape.kernel, shape.kernel});
    l.bias = params.add(l.name + ".bias", {shape.cout});
    return l;
  }

  template <class T>
  Tensor<T> forward(const Tensor<T>& x, const ModelParams<T>& p) const {
    return conv2d<T>(x, p.values(weight), p.values(bias), shape);
  }

  template <class T>
  void backward(const Tensor<T>& x, const ModelParams<T>& p, const Tensor<T>& dy, ModelParams<T>& grads,
                Tensor<T>* dx) const {
    conv2d_backward<T>(x, p.values(weight), shape, dy, grads.values(weight), grads.values(bias), dx);
  }
};

}  // namespace crme::nn
