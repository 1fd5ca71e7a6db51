#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/grid.hpp"

namespace crme::eval {

/// ||estimate - label||^2 / ||label||^2.
inline double nmse(const Grid<double>& estimate, const Grid<double>& label) {
  require_same_shape(estimate, label, "nmse");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const double e = estimate.values()[i] - label.values()[i];
    num += e * e;
    den += label.values()[i] * label.values()[i];
  }
  if (den == 0.0) throw NumericError("nmse: label is identically zero, normalization undefined");
  return num / den;
}

inline double rmse(const Grid<double>& estimate, const Grid<double>& label) {
  require_same_shape(estimate, label, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const double e = estimate.values()[i] - label.values()[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(label.size()));
}

/// RMSE restricted to `cells`; used for the removed-building footprints.
inline double masked_rmse(const Grid<double>& estimate, const Grid<double>& label, std::span<const Cell> cells) {
  require_same_shape(estimate, label, "masked_rmse");
  if (cells.empty()) throw NumericError("masked_rmse: empty mask");
  double s = 0.0;
  for (Cell c : cells) {
    const double e = estimate.at(c.x, c.y) - label.at(c.x, c.y);
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(cells.size()));
}

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population standard deviation
};

inline Summary summarize(std::vector<double> v) {
  Summary s;
  s.count = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return s;
}

}  // namespace crme::eval
