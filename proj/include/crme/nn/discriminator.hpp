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

/// Convolutional critic over (input image, candidate map) pairs. The first
/// `strided_layers` convs halve the resolution; the remaining ones keep it.
/// The raw 3-channel input, average-pooled to the current resolution, is
/// concatenated onto the inputs of the last `late_concat` layers (never the
/// first). The last layer emits one channel squashed to [0, 1]: a score map.
struct DiscriminatorSpec {
  int in_channels = 3;
  int layers = 5;
  int base_channels = 64;
  int max_channels = 512;
  int kernel_size = 4;
  int strided_layers = 3;
  int late_concat = 2;

  int channels(int layer) const {
    if (layer == layers - 1) return 1;
    return static_cast<int>(std::min<long long>(static_cast<long long>(base_channels) << layer, max_channels));
  }
  bool concat_at(int layer) const { return layer >= 1 && layer >= layers - late_concat; }
  int divisor() const { return 1 << strided_layers; }

  void validate() const {
    if (layers < 1 || base_channels < 1 || max_channels < 1 || kernel_size < 2 || in_channels < 1) {
      throw ValidationError("discriminator spec: sizes must be positive (kernel >= 2)");
    }
    if (strided_layers < 0 || strided_layers > layers || late_concat < 0) {
      throw ValidationError("discriminator spec: strided_layers/late_concat out of range");
    }
  }
  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

inline Json to_json(const DiscriminatorSpec& s) {
  return {{"type", "cnn_discriminator"}, {"in_channels", s.in_channels}, {"layers", s.layers},
          {"base_channels", s.base_channels}, {"max_channels", s.max_channels},
          {"kernel_size", s.kernel_size}, {"strided_layers", s.strided_layers},
          {"late_concat", s.late_concat}};
}

inline DiscriminatorSpec discriminator_spec_from_json(const Json& j) {
  DiscriminatorSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "type") continue;
    if (key == "in_channels") s.in_channels = v.get<int>();
    else if (key == "layers") s.layers = v.get<int>();
    else if (key == "base_channels") s.base_channels = v.get<int>();
    else if (key == "max_channels") s.max_channels = v.get<int>();
    else if (key == "kernel_size") s.kernel_size = v.get<int>();
    else if (key == "strided_layers") s.strided_layers = v.get<int>();
    else if (key == "late_concat") s.late_concat = v.get<int>();
    else throw ValidationError("discriminator_spec: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

template <class T>
class Discriminator {
 public:
  struct Cache {
    Tensor<T> raw;
    std::vector<Tensor<T>> inputs;
    std::vector<Tensor<T>> outputs;
    std::vector<int> pool;  // pooling factor of the raw input per layer, 0 = none
  };

  explicit Discriminator(DiscriminatorSpec spec) : spec_(spec) {
    spec_.validate();
    const int k = spec_.kernel_size;
    for (int l = 0; l < spec_.layers; ++l) {
      int cin = l == 0 ? spec_.in_channels : spec_.channels(l - 1);
      if (spec_.concat_at(l)) cin += spec_.in_channels;
      const ConvShape shape = l < spec_.strided_layers ? ConvShape::halving(cin, spec_.channels(l), k)
                                                       : ConvShape::same(cin, spec_.channels(l), k);
      layers_.push_back(ConvLayer::declare(layout_, "layer" + std::to_string(l), shape));
    }
  }

  const DiscriminatorSpec& spec() const noexcept { return spec_; }
  ModelParams<T> layout() const { return layout_; }
  ModelParams<T> init_params(std::uint64_t seed) const {
    ModelParams<T> p = layout_;
    init_fan_in(p, seed);
    return p;
  }
  std::size_t learned_layer_count() const { return layout_.count() / 2; }

  /// Scores the pair ([N,2,H,W] input, [N,1,H,W] candidate); entries in [0, 1].
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& candidate, const ModelParams<T>& p,
                    Cache* cache = nullptr) const {
    if (!p.same_layout(layout_)) throw ShapeError("discriminator parameters do not match the spec");
    if (x.c() + candidate.c() != spec_.in_channels || x.n() != candidate.n() || x.h() != candidate.h() ||
        x.w() != candidate.w()) {
      throw ShapeError("discriminator input " + shape_string(x) + " + " + shape_string(candidate) +
                       " inconsistent with spec");
    }
    if (x.h() % spec_.divisor() != 0 || x.w() % spec_.divisor() != 0) {
      throw ShapeError("discriminator input " + shape_string(x) + " not divisible by " +
                       std::to_string(spec_.divisor()));
    }
    Cache local;
    Cache& c = cache ? *cache : local;
    c.raw = concat_channels(x, candidate);
    c.inputs.assign(spec_.layers, {});
    c.outputs.assign(spec_.layers, {});
    c.pool.assign(spec_.layers, 0);
    const Tensor<T>* cur = &c.raw;
    for (int l = 0; l < spec_.layers; ++l) {
      if (spec_.concat_at(l)) {
        c.pool[l] = c.raw.h() / cur->h();
        c.inputs[l] = concat_channels(*cur, avg_pool(c.raw, c.pool[l]));
      } else {
        c.inputs[l] = *cur;
      }
      c.outputs[l] = layers_[l].forward(c.inputs[l], p);
      if (l + 1 < spec_.layers) leaky_relu_inplace(c.outputs[l]);
      else sigmoid_inplace(c.outputs[l]);
      cur = &c.outputs[l];
    }
    return c.outputs.back();
  }

  /// Accumulates parameter gradients into `grads` (skipped when null) and
  /// writes dL/d(candidate) when dcandidate is non-null.
  void backward(const Cache& c, const ModelParams<T>& p, Tensor<T> dscore, ModelParams<T>* grads,
                Tensor<T>* dcandidate = nullptr) const {
    require_shape(dscore, c.outputs.back(), "discriminator backward");
    ModelParams<T> scratch;
    ModelParams<T>& g = grads ? *grads : (scratch = layout_.zeros_like());
    const bool need_raw = dcandidate != nullptr;
    Tensor<T> draw;
    if (need_raw) draw = Tensor<T>(c.raw.n(), c.raw.c(), c.raw.h(), c.raw.w());
    Tensor<T> d = std::move(dscore);
    for (int l = spec_.layers - 1; l >= 0; --l) {
      if (l + 1 < spec_.layers) leaky_relu_backward(c.outputs[l], d);
      else sigmoid_backward(c.outputs[l], d);
      const bool need_din = l > 0 || need_raw;
      Tensor<T> din;
      layers_[l].backward(c.inputs[l], p, d, g, need_din ? &din : nullptr);
      if (!need_din) break;
      if (c.pool[l] > 0) {
        const int cprev = din.c() - spec_.in_channels;
        auto [dprev, dpooled] = split_channels(din, cprev);
        if (need_raw) add_inplace(draw, avg_pool_backward(dpooled, c.pool[l]));
        din = std::move(dprev);
      }
      if (l == 0) add_inplace(draw, din);
      else d = std::move(din);
    }
    if (need_raw) *dcandidate = split_channels(draw, spec_.in_channels - 1).second;
  }

 private:
  DiscriminatorSpec spec_;
  ModelParams<T> layout_;
  std::vector<ConvLayer> layers_;
};

}  // namespace crme::nn
