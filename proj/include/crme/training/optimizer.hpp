#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "crme/core/error.hpp"
#include "crme/nn/params.hpp"

namespace crme::training {

enum class OptimizerKind { plain, adam };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::plain ? "plain" : "adam"; }

inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "plain" || s == "sgd") return OptimizerKind::plain;
  if (s == "adam" || s == "momentum-adaptive") return OptimizerKind::adam;
  throw ValidationError("unknown optimizer '" + std::string(s) + "'");
}

/// theta <- theta - eta * g, or the bias-corrected Adam update when kind is
/// adam (beta1 = 0.5, beta2 = 0.999, the usual adversarial-training choice).
template <class T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double step, const nn::ModelParams<T>& like)
      : kind_(kind), step_(step) {
    if (!(step > 0.0)) throw ValidationError("step size must be > 0");
    if (kind_ == OptimizerKind::adam) {
      m_ = like.zeros_like();
      v_ = like.zeros_like();
    }
  }

  void apply(nn::ModelParams<T>& params, const nn::ModelParams<T>& grads) {
    ++t_;
    if (kind_ == OptimizerKind::plain) {
      for (std::size_t a = 0; a < params.count(); ++a) {
        auto p = params.values(a);
        auto g = grads.values(a);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= static_cast<T>(step_) * g[i];
      }
      return;
    }
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T lr = static_cast<T>(step_ * std::sqrt(c2) / c1);
    for (std::size_t a = 0; a < params.count(); ++a) {
      auto p = params.values(a);
      auto g = grads.values(a);
      auto m = m_.values(a);
      auto v = v_.values(a);
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = static_cast<T>(beta1_) * m[i] + static_cast<T>(1 - beta1_) * g[i];
        v[i] = static_cast<T>(beta2_) * v[i] + static_cast<T>(1 - beta2_) * g[i] * g[i];
        p[i] -= lr * m[i] / (std::sqrt(v[i]) + static_cast<T>(eps_));
      }
    }
  }

  OptimizerKind kind() const noexcept { return kind_; }
  double step() const noexcept { return step_; }
  long steps_taken() const noexcept { return t_; }

 private:
  OptimizerKind kind_;
  double step_;
  double beta1_ = 0.5;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  nn::ModelParams<T> m_, v_;
};

}  // namespace crme::training
