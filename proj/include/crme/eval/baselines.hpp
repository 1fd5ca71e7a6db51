#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/grid.hpp"
#include "crme/dataset/record.hpp"

namespace crme::eval {

enum class BaselineMethod { idw, kernel, kriging };

/// Classical interpolators over the record's RSS samples. Distances are in
/// cells. Kriging uses an exponential variogram
/// gamma(h) = nugget + (sill - nugget) (1 - exp(-h / range)), gamma(0) = 0;
/// with fit_variogram the sill is the sample variance and the range is
/// chosen against the binned empirical semivariogram.
struct BaselineSpec {
  BaselineMethod method = BaselineMethod::idw;
  double power = 2.0;        // idw
  double bandwidth = 6.0;    // kernel, Gaussian std in cells
  double range = 16.0;       // kriging
  double sill = 0.01;        // kriging
  double nugget = 0.0;       // kriging
  bool fit_variogram = true;  // kriging

  void validate() const {
    if (!(power > 0.0)) throw ValidationError("idw power must be > 0");
    if (!(bandwidth > 0.0)) throw ValidationError("kernel bandwidth must be > 0");
    if (!(range > 0.0) || !(sill > 0.0) || nugget < 0.0 || nugget > sill) {
      throw ValidationError("kriging variogram needs range > 0, sill > 0, 0 <= nugget <= sill");
    }
  }

  std::string name() const {
    switch (method) {
      case BaselineMethod::idw: return "idw";
      case BaselineMethod::kernel: return "kernel";
      case BaselineMethod::kriging: return "kriging";
    }
    return "?";
  }

  static BaselineSpec idw(double p = 2.0) { return {.method = BaselineMethod::idw, .power = p}; }
  static BaselineSpec kernel(double h = 6.0) { return {.method = BaselineMethod::kernel, .bandwidth = h}; }
  static BaselineSpec kriging() { return {.method = BaselineMethod::kriging}; }
};

inline Json to_json(const BaselineSpec& s) {
  return {{"method", s.name()}, {"power", s.power}, {"bandwidth", s.bandwidth}, {"range", s.range},
          {"sill", s.sill},     {"nugget", s.nugget}, {"fit_variogram", s.fit_variogram}};
}

inline BaselineSpec baseline_spec_from_json(const Json& j) {
  BaselineSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "method") {
      const auto m = v.get<std::string>();
      if (m == "idw" || m == "inverse-distance-weighting") s.method = BaselineMethod::idw;
      else if (m == "kernel" || m == "kernel-regression") s.method = BaselineMethod::kernel;
      else if (m == "kriging" || m == "ordinary-kriging") s.method = BaselineMethod::kriging;
      else throw ValidationError("unknown baseline method '" + m + "'");
    } else if (key == "power") s.power = v.get<double>();
    else if (key == "bandwidth") s.bandwidth = v.get<double>();
    else if (key == "range") s.range = v.get<double>();
    else if (key == "sill") s.sill = v.get<double>();
    else if (key == "nugget") s.nugget = v.get<double>();
    else if (key == "fit_variogram") s.fit_variogram = v.get<bool>();
    else throw ValidationError("baseline: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

struct Sample {
  Cell cell;
  double value = 0.0;
};

inline std::vector<Sample> samples_of(const dataset::SampleRecord& rec) {
  std::vector<Sample> out;
  for (Cell c : rec.meta.sample_locations) out.push_back({c, rec.rss[c]});
  return out;
}

inline double cell_distance(Cell a, Cell b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

inline Grid<double> idw_estimate(const std::vector<Sample>& s, int width, int height, double power) {
  if (s.empty()) throw ValidationError("idw needs at least one sample");
  Grid<double> out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double num = 0.0, den = 0.0;
      bool exact = false;
      for (const auto& p : s) {
        const double d = cell_distance({x, y}, p.cell);
        if (d == 0.0) {
          out(x, y) = p.value;
          exact = true;
          break;
        }
        const double w = std::pow(d, -power);
        num += w * p.value;
        den += w;
      }
      if (!exact) out(x, y) = num / den;
    }
  return out;
}

inline Grid<double> kernel_estimate(const std::vector<Sample>& s, int width, int height, double bandwidth) {
  if (s.empty()) throw ValidationError("kernel regression needs at least one sample");
  Grid<double> out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double num = 0.0, den = 0.0, nearest = std::numeric_limits<double>::infinity(), nearest_v = 0.0;
      for (const auto& p : s) {
        const double d = cell_distance({x, y}, p.cell);
        const double w = std::exp(-0.5 * d * d / (bandwidth * bandwidth));
        num += w * p.value;
        den += w;
        if (d < nearest) {
          nearest = d;
          nearest_v = p.value;
        }
      }
      out(x, y) = den > 1e-300 ? num / den : nearest_v;
    }
  return out;
}

struct Variogram {
  double range = 16.0;
  double sill = 0.01;
  double nugget = 0.0;

  double operator()(double h) const {
    if (h == 0.0) return 0.0;
    return nugget + (sill - nugget) * (1.0 - std::exp(-h / range));
  }
};

/// Sill from the sample variance, range by least squares over a log grid
/// against the binned empirical semivariogram.
inline Variogram fit_exponential_variogram(const std::vector<Sample>& s, double nugget, double max_range) {
  double mean = 0.0;
  for (const auto& p : s) mean += p.value;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (const auto& p : s) var += (p.value - mean) * (p.value - mean);
  var /= static_cast<double>(s.size());
  Variogram v{max_range / 4.0, std::max(var, 1e-12), std::min(nugget, std::max(var, 1e-12))};

  constexpr int kBins = 12;
  std::vector<double> sum(kBins, 0.0), cnt(kBins, 0.0);
  const double bin_width = max_range / kBins;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double d = cell_distance(s[i].cell, s[j].cell);
      const int b = static_cast<int>(d / bin_width);
      if (b >= kBins) continue;
      const double g = s[i].value - s[j].value;
      sum[b] += 0.5 * g * g;
      cnt[b] += 1.0;
    }
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 40; ++k) {
    const double r = 0.5 * std::pow(2.0 * max_range / 0.5, k / 40.0);
    Variogram cand = v;
    cand.range = r;
    double err = 0.0;
    for (int b = 0; b < kBins; ++b) {
      if (cnt[b] == 0.0) continue;
      const double h = (b + 0.5) * bin_width;
      const double e = sum[b] / cnt[b] - cand(h);
      err += cnt[b] * e * e;
    }
    if (err < best) {
      best = err;
      v.range = r;
    }
  }
  return v;
}

inline Grid<double> kriging_estimate(const std::vector<Sample>& s, int width, int height, Variogram vg) {
  if (s.size() < 3) throw ValidationError("ordinary kriging needs at least 3 samples");
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd a(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = vg(cell_distance(s[i].cell, s[j].cell));
    a(i, n) = 1.0;
    a(n, i) = 1.0;
  }
  a(n, n) = 0.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw NumericError("kriging system is singular");

  const Eigen::Index cells = static_cast<Eigen::Index>(width) * height;
  Eigen::MatrixXd rhs(n + 1, cells);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Eigen::Index col = static_cast<Eigen::Index>(y) * width + x;
      for (Eigen::Index i = 0; i < n; ++i) rhs(i, col) = vg(cell_distance({x, y}, s[i].cell));
      rhs(n, col) = 1.0;
    }
  const Eigen::MatrixXd w = lu.solve(rhs);
  Eigen::VectorXd values(n);
  for (Eigen::Index i = 0; i < n; ++i) values(i) = s[i].value;
  Grid<double> out(width, height);
  for (Eigen::Index col = 0; col < cells; ++col) out.values()[col] = w.col(col).head(n).dot(values);
  // Exact interpolation at the samples when the nugget is zero; the solve
  // only reproduces them up to rounding, so pin them.
  if (vg.nugget == 0.0)
    for (const auto& p : s) out[p.cell] = p.value;
  return out;
}

/// Full-grid gray estimate from the record's RSS samples, clamped to [0, 1].
inline Grid<double> baseline_estimate(const dataset::SampleRecord& rec, const BaselineSpec& spec) {
  spec.validate();
  const auto s = samples_of(rec);
  if (s.empty()) throw ValidationError("baseline '" + spec.name() + "' needs at least one RSS sample");
  Grid<double> out;
  switch (spec.method) {
    case BaselineMethod::idw: out = idw_estimate(s, rec.width(), rec.height(), spec.power); break;
    case BaselineMethod::kernel: out = kernel_estimate(s, rec.width(), rec.height(), spec.bandwidth); break;
    case BaselineMethod::kriging: {
      Variogram vg{spec.range, spec.sill, spec.nugget};
      if (spec.fit_variogram) {
        if (s.size() < 3) throw ValidationError("ordinary kriging needs at least 3 samples");
        vg = fit_exponential_variogram(s, spec.nugget, 0.5 * std::hypot(rec.width(), rec.height()));
      }
      out = kriging_estimate(s, rec.width(), rec.height(), vg);
      break;
    }
  }
  for (auto& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace crme::eval
