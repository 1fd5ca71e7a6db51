#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "crme/core/files.hpp"
#include "crme/nn/layers.hpp"
#include "crme/nn/ops.hpp"
#include "crme/nn/params.hpp"
#include "crme/nn/tensor.hpp"

namespace crme::nn {

/// UNet generator layout. Stage i runs at resolution H / 2^i with
/// min(base * 2^i, max) channels. Learned layers: per stage one encoder
/// conv, one stride-2 down conv, one up conv and (except stage 0) one fuse
/// conv, plus the bottleneck and the output conv: 4 * depth + 1 in total.
struct GeneratorSpec {
  int in_channels = 2;
  int depth = 4;
  int base_channels = 64;
  int max_channels = 512;
  int kernel_size = 3;

  int channels(int stage) const {
    return static_cast<int>(std::min<long long>(static_cast<long long>(base_channels) << stage, max_channels));
  }
  int learned_layers() const { return 4 * depth + 1; }
  int divisor() const { return 1 << depth; }

  void validate() const {
    if (depth < 1 || base_channels < 1 || max_channels < 1 || kernel_size < 1 || in_channels < 1) {
      throw ValidationError("generator spec: all sizes must be positive");
    }
  }
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

inline Json to_json(const GeneratorSpec& s) {
  return {{"type", "unet_generator"}, {"in_channels", s.in_channels}, {"depth", s.depth},
          {"base_channels", s.base_channels}, {"max_channels", s.max_channels},
          {"kernel_size", s.kernel_size}};
}

inline GeneratorSpec generator_spec_from_json(const Json& j) {
  GeneratorSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "type") continue;
    if (key == "in_channels") s.in_channels = v.get<int>();
    else if (key == "depth") s.depth = v.get<int>();
    else if (key == "base_channels") s.base_channels = v.get<int>();
    else if (key == "max_channels") s.max_channels = v.get<int>();
    else if (key == "kernel_size") s.kernel_size = v.get<int>();
    else throw ValidationError("generator_spec: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

template <class T>
class Generator {
 public:
  struct Cache {
    Tensor<T> x;
    std::vector<Tensor<T>> enc;    // skip sources, per stage
    std::vector<Tensor<T>> down;   // after stride-2 conv, per stage
    Tensor<T> bottleneck;
    std::vector<Tensor<T>> up;     // up conv output before upsampling, per stage
    std::vector<Tensor<T>> cat;    // [upsampled, skip], per stage
    std::vector<Tensor<T>> fuse;   // per stage, empty at stage 0
    Tensor<T> out;
  };

  explicit Generator(GeneratorSpec spec) : spec_(spec) {
    spec_.validate();
    const int d = spec_.depth;
    const int k = spec_.kernel_size;
    for (int i = 0; i < d; ++i) {
      const int cin = i == 0 ? spec_.in_channels : spec_.channels(i);
      enc_.push_back(ConvLayer::declare(layout_, "enc" + std::to_string(i), ConvShape::same(cin, spec_.channels(i), k)));
      down_.push_back(ConvLayer::declare(layout_, "down" + std::to_string(i),
                                         ConvShape::halving(spec_.channels(i), spec_.channels(i + 1), k)));
    }
    bottleneck_ = ConvLayer::declare(layout_, "bottleneck", ConvShape::same(spec_.channels(d), spec_.channels(d), k));
    up_.resize(static_cast<std::size_t>(d));
    fuse_.resize(static_cast<std::size_t>(d));
    for (int i = d - 1; i >= 0; --i) {
      up_[i] = ConvLayer::declare(layout_, "up" + std::to_string(i),
                                  ConvShape::same(spec_.channels(i + 1), spec_.channels(i), k));
      if (i > 0) {
        fuse_[i] = ConvLayer::declare(layout_, "fuse" + std::to_string(i),
                                      ConvShape::same(2 * spec_.channels(i), spec_.channels(i), k));
      }
    }
    out_ = ConvLayer::declare(layout_, "out", ConvShape::same(2 * spec_.channels(0), 1, k));
  }

  const GeneratorSpec& spec() const noexcept { return spec_; }

  /// Zero-valued parameter set with this network's names and shapes.
  ModelParams<T> layout() const { return layout_; }

  ModelParams<T> init_params(std::uint64_t seed) const {
    ModelParams<T> p = layout_;
    init_fan_in(p, seed);
    return p;
  }

  std::size_t learned_layer_count() const { return layout_.count() / 2; }

  /// [N, in_channels, H, W] -> [N, 1, H, W] in [0, 1]; H and W must be
  /// multiples of 2^depth.
  Tensor<T> forward(const Tensor<T>& x, const ModelParams<T>& p, Cache* cache = nullptr) const {
    check(x, p);
    Cache local;
    Cache& c = cache ? *cache : local;
    const int d = spec_.depth;
    c.x = x;
    c.enc.assign(d, {});
    c.down.assign(d, {});
    c.up.assign(d, {});
    c.cat.assign(d, {});
    c.fuse.assign(d, {});
    const Tensor<T>* cur = &c.x;
    for (int i = 0; i < d; ++i) {
      c.enc[i] = enc_[i].forward(*cur, p);
      leaky_relu_inplace(c.enc[i]);
      c.down[i] = down_[i].forward(c.enc[i], p);
      leaky_relu_inplace(c.down[i]);
      cur = &c.down[i];
    }
    c.bottleneck = bottleneck_.forward(*cur, p);
    leaky_relu_inplace(c.bottleneck);
    cur = &c.bottleneck;
    for (int i = d - 1; i >= 0; --i) {
      c.up[i] = up_[i].forward(*cur, p);
      relu_inplace(c.up[i]);
      c.cat[i] = concat_channels(upsample2(c.up[i]), c.enc[i]);
      if (i > 0) {
        c.fuse[i] = fuse_[i].forward(c.cat[i], p);
        relu_inplace(c.fuse[i]);
        cur = &c.fuse[i];
      }
    }
    c.out = out_.forward(c.cat[0], p);
    sigmoid_inplace(c.out);
    return c.out;
  }

  /// Accumulates dL/dparams into `grads` given dL/d(output); writes dL/dx
  /// when dx is non-null.
  void backward(const Cache& c, const ModelParams<T>& p, Tensor<T> dout, ModelParams<T>& grads,
                Tensor<T>* dx = nullptr) const {
    const int d = spec_.depth;
    require_shape(dout, c.out, "generator backward");
    sigmoid_backward(c.out, dout);
    Tensor<T> dcat;
    out_.backward(c.cat[0], p, dout, grads, &dcat);

    std::vector<Tensor<T>> dskip(static_cast<std::size_t>(d));
    Tensor<T> dcur;
    for (int i = 0; i < d; ++i) {
      if (i > 0) {
        relu_backward(c.fuse[i], dcur);
        fuse_[i].backward(c.cat[i], p, dcur, grads, &dcat);
      }
      auto [dup, dsk] = split_channels(dcat, spec_.channels(i));
      dskip[i] = std::move(dsk);
      Tensor<T> dlow = upsample2_backward(dup);
      relu_backward(c.up[i], dlow);
      const Tensor<T>& up_in = i + 1 < d ? c.fuse[i + 1] : c.bottleneck;
      up_.at(i).backward(up_in, p, dlow, grads, &dcur);
    }

    leaky_relu_backward(c.bottleneck, dcur);
    Tensor<T> dh;
    bottleneck_.backward(c.down[d - 1], p, dcur, grads, &dh);
    for (int i = d - 1; i >= 0; --i) {
      leaky_relu_backward(c.down[i], dh);
      Tensor<T> da;
      down_[i].backward(c.enc[i], p, dh, grads, &da);
      add_inplace(da, dskip[i]);
      leaky_relu_backward(c.enc[i], da);
      const Tensor<T>& in = i > 0 ? c.down[i - 1] : c.x;
      const bool need_dx = i > 0 || dx != nullptr;
      Tensor<T> din;
      enc_[i].backward(in, p, da, grads, need_dx ? &din : nullptr);
      if (i > 0) dh = std::move(din);
      else if (dx) *dx = std::move(din);
    }
  }

 private:
  void check(const Tensor<T>& x, const ModelParams<T>& p) const {
    if (x.c() != spec_.in_channels) {
      throw ShapeError("generator expects " + std::to_string(spec_.in_channels) + " channels, got " +
                       shape_string(x));
    }
    if (x.h() % spec_.divisor() != 0 || x.w() % spec_.divisor() != 0 || x.h() == 0 || x.w() == 0) {
      throw ShapeError("generator input " + shape_string(x) + " not divisible by " +
                       std::to_string(spec_.divisor()));
    }
    if (!p.same_layout(layout_)) throw ShapeError("generator parameters do not match the spec");
  }

  GeneratorSpec spec_;
  ModelParams<T> layout_;
  std::vector<ConvLayer> enc_, down_, up_, fuse_;
  ConvLayer bottleneck_, out_;
};

}  // namespace crme::nn
