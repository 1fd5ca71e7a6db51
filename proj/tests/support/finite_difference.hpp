#pragma once

// Central finite differences, used as the independent oracle for every
// hand-written backward pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "crme/nn/params.hpp"

namespace crme::testing {

struct GradientComparison {
  std::size_t coordinates = 0;
  std::size_t within_tolerance = 0;
  double max_relative_error = 0.0;

  double fraction_within() const {
    return coordinates == 0 ? 1.0 : static_cast<double>(within_tolerance) / static_cast<double>(coordinates);
  }
};

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

/// Perturbs every scalar of `params` by +-h and compares the centred slope
/// of `loss` against `analytic`.
inline GradientComparison compare_gradients(nn::ModelParams<double>& params,
                                            const nn::ModelParams<double>& analytic,
                                            const std::function<double()>& loss, double tolerance,
                                            double h = 1e-6) {
  GradientComparison out;
  for (std::size_t a = 0; a < params.count(); ++a) {
    auto vals = params.values(a);
    auto grad = analytic.values(a);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double up = loss();
      vals[i] = saved - h;
      const double down = loss();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(grad[i], numeric);
      ++out.coordinates;
      if (err <= tolerance) ++out.within_tolerance;
      out.max_relative_error = std::max(out.max_relative_error, err);
    }
  }
  return out;
}

}  // namespace crme::testing
