#pragma once

#include <span>

#include "crme/core/error.hpp"
#include "crme/nn/tensor.hpp"

namespace crme::training {

namespace detail {
template <class T>
double sq_dist_to(std::span<const T> a, double target) {
  double s = 0.0;
  for (T v : a) {
    const double d = target - static_cast<double>(v);
    s += d * d;
  }
  return s;
}

template <class T>
double sq_dist(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("loss: operand sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}
}  // namespace detail

/// Discriminator loss: ||1 - S||^2 + ||0 - S_fake||^2 (squared Frobenius
/// norms, summed over every element of the batch).
template <class T>
double loss_discriminator(std::span<const T> s_real, std::span<const T> s_fake) {
  if (s_real.size() != s_fake.size()) throw ShapeError("loss_discriminator: score maps differ in shape");
  return detail::sq_dist_to(s_real, 1.0) + detail::sq_dist_to(s_fake, 0.0);
}

template <class T>
double loss_discriminator(const nn::Tensor<T>& s_real, const nn::Tensor<T>& s_fake) {
  nn::require_shape(s_real, s_fake, "loss_discriminator");
  return loss_discriminator<T>(s_real.values(), s_fake.values());
}

struct GeneratorLoss {
  double adversarial = 0.0;  // ||1 - S_fake||^2
  double pixel = 0.0;        // lambda * ||P - P_fake||^2
  double total() const { return adversarial + pixel; }
};

/// Generator loss: ||1 - S_fake||^2 + lambda ||P - P_fake||^2.
template <class T>
GeneratorLoss generator_loss_terms(std::span<const T> s_fake, std::span<const T> label,
                                   std::span<const T> estimate, double lambda) {
  if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
  return {detail::sq_dist_to(s_fake, 1.0), lambda * detail::sq_dist(label, estimate)};
}

template <class T>
double loss_generator(std::span<const T> s_fake, std::span<const T> label, std::span<const T> estimate,
                      double lambda) {
  return generator_loss_terms(s_fake, label, estimate, lambda).total();
}

template <class T>
double loss_generator(const nn::Tensor<T>& s_fake, const nn::Tensor<T>& label, const nn::Tensor<T>& estimate,
                      double lambda) {
  nn::require_shape(label, estimate, "loss_generator");
  return loss_generator<T>(s_fake.values(), label.values(), estimate.values(), lambda);
}

// Gradients of the losses with respect to their tensor arguments.

/// dL_D/dS_real = -2 (1 - S), dL_D/dS_fake = 2 S_fake.
template <class T>
void loss_discriminator_grad(const nn::Tensor<T>& s_real, const nn::Tensor<T>& s_fake, nn::Tensor<T>& d_real,
                             nn::Tensor<T>& d_fake) {
  d_real = s_real;
  d_fake = s_fake;
  for (auto& v : d_real.values()) v = T(-2) * (T(1) - v);
  for (auto& v : d_fake.values()) v = T(2) * v;
}

/// dL_G/dS_fake = -2 (1 - S_fake).
template <class T>
nn::Tensor<T> adversarial_grad(const nn::Tensor<T>& s_fake) {
  nn::Tensor<T> d = s_fake;
  for (auto& v : d.values()) v = T(-2) * (T(1) - v);
  return d;
}

/// d(lambda ||P - P_fake||^2)/dP_fake = -2 lambda (P - P_fake).
template <class T>
nn::Tensor<T> pixel_grad(const nn::Tensor<T>& label, const nn::Tensor<T>& estimate, double lambda) {
  nn::require_shape(label, estimate, "pixel_grad");
  nn::Tensor<T> d = estimate;
  auto lv = label.values();
  auto dv = d.values();
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = static_cast<T>(-2.0 * lambda) * (lv[i] - dv[i]);
  return d;
}

}  // namespace crme::training
