#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/png_io.hpp"
#include "crme/core/seed.hpp"
#include "crme/dataset/builder.hpp"
#include "crme/dataset/codec.hpp"
#include "crme/dataset/record.hpp"
#include "crme/eval/baselines.hpp"
#include "crme/eval/metrics.hpp"
#include "crme/nn/generator.hpp"
#include "crme/training/batch.hpp"

namespace crme::eval {

/// Maps a record (with its RSS channel) to a full-grid gray estimate.
/// Must be safe to call concurrently.
using Estimator = std::function<Grid<double>(const dataset::SampleRecord&)>;

struct Method {
  std::string name;
  Estimator estimate;
};

/// Returns the label itself; every metric must come out exactly zero.
inline Method identity_oracle() {
  return {"oracle", [](const dataset::SampleRecord& r) { return r.label.grid(); }};
}

inline Method baseline_method(const BaselineSpec& spec) {
  spec.validate();
  return {spec.name(), [spec](const dataset::SampleRecord& r) { return baseline_estimate(r, spec); }};
}

template <class T>
Method generator_method(std::string name, nn::GeneratorSpec spec, nn::ModelParams<T> params) {
  auto net = std::make_shared<const nn::Generator<T>>(spec);
  auto p = std::make_shared<const nn::ModelParams<T>>(std::move(params));
  return {std::move(name), [net, p](const dataset::SampleRecord& r) {
            return training::tensor_to_grid(net->forward(training::input_tensor<T>(r), *p));
          }};
}

enum class MetricDomain { gray, db };

inline MetricDomain metric_domain_from_string(const std::string& s) {
  if (s == "gray") return MetricDomain::gray;
  if (s == "db") return MetricDomain::db;
  throw ValidationError("metric domain must be 'gray' or 'db', got '" + s + "'");
}

inline std::string to_string(MetricDomain d) { return d == MetricDomain::gray ? "gray" : "db"; }

struct EvalOptions {
  std::vector<int> k_grid = {18, 62};
  std::uint64_t seed = 0;
  int workers = 1;
  MetricDomain domain = MetricDomain::gray;
  dataset::GrayCodec codec;  // only used for db-domain metrics
};

struct EvalRow {
  std::string record_id;
  std::string method;
  int k = 0;
  bool flawed = false;
  double nmse = 0.0;
  double rmse = 0.0;
  std::optional<double> masked_rmse;  // flawed records with a non-empty removal only
};

struct Aggregate {
  std::string method;
  int k = 0;
  bool flawed = false;
  Summary nmse;
  Summary rmse;
  Summary masked_rmse;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t skipped = 0;  // records without a removed footprint (error-correction runs)
  MetricDomain domain = MetricDomain::gray;

  /// Recomputed from rows on every call, grouped by (method, K, flawed).
  std::vector<Aggregate> aggregates() const {
    std::map<std::tuple<std::string, int, bool>, std::array<std::vector<double>, 3>> groups;
    std::vector<std::tuple<std::string, int, bool>> order;
    for (const auto& r : rows) {
      auto key = std::make_tuple(r.method, r.k, r.flawed);
      auto [it, inserted] = groups.try_emplace(key);
      if (inserted) order.push_back(key);
      it->second[0].push_back(r.nmse);
      it->second[1].push_back(r.rmse);
      if (r.masked_rmse) it->second[2].push_back(*r.masked_rmse);
    }
    std::vector<Aggregate> out;
    for (const auto& key : order) {
      auto& g = groups.at(key);
      out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), summarize(g[0]), summarize(g[1]),
                     summarize(g[2])});
    }
    return out;
  }

  const Aggregate& find(const std::vector<Aggregate>& aggs, const std::string& method, int k) const {
    for (const auto& a : aggs)
      if (a.method == method && a.k == k) return a;
    throw ValidationError("no results for method '" + method + "' at K=" + std::to_string(k));
  }

  double median_nmse(const std::string& method, int k) const { return find(aggregates(), method, k).nmse.median; }
  double median_masked_rmse(const std::string& method, int k) const {
    return find(aggregates(), method, k).masked_rmse.median;
  }

  std::string to_csv() const {
    std::string out = "record_id,method,k,flawed,nmse,rmse,masked_rmse\n";
    char buf[128];
    for (const auto& r : rows) {
      out += r.record_id + "," + r.method + "," + std::to_string(r.k) + "," + (r.flawed ? "1" : "0");
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", r.nmse, r.rmse);
      out += buf;
      if (r.masked_rmse) {
        std::snprintf(buf, sizeof buf, "%.17g", *r.masked_rmse);
        out += buf;
      }
      out += "\n";
    }
    return out;
  }

  Json summary_json() const {
    auto summary = [](const Summary& s) {
      return Json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"std", s.std}};
    };
    Json groups = Json::array();
    for (const auto& a : aggregates()) {
      Json g{{"method", a.method}, {"k", a.k}, {"flawed", a.flawed}, {"nmse", summary(a.nmse)},
             {"rmse", summary(a.rmse)}};
      if (a.masked_rmse.count) g["masked_rmse"] = summary(a.masked_rmse);
      groups.push_back(std::move(g));
    }
    return {{"domain", to_string(domain)}, {"rows", rows.size()}, {"skipped", skipped}, {"groups", groups}};
  }

  void append(const EvalReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    skipped += other.skipped;
  }
};

/// Seed for re-drawing a record's users at K; depends only on (record_id, K)
/// so K-points are independent and repeated K values agree.
inline std::uint64_t resample_seed(std::uint64_t root, const std::string& record_id, int k) {
  return derive_seed(root, {fnv1a64(record_id), static_cast<std::uint64_t>(k)});
}

namespace detail {

inline Grid<double> to_metric_domain(const Grid<double>& g, const EvalOptions& o) {
  if (o.domain == MetricDomain::gray) return g;
  return g.map([&](double v) { return o.codec.decode(v); });
}

inline EvalRow score(const dataset::SampleRecord& rec, const Method& m, int k, const EvalOptions& o) {
  const Grid<double> est = m.estimate(rec);
  require_same_shape(est, rec.label.grid(), "estimate of '" + m.name + "'");
  const auto e = to_metric_domain(est, o);
  const auto l = to_metric_domain(rec.label.grid(), o);
  EvalRow row{rec.id, m.name, k, rec.meta.flawed(), nmse(e, l), rmse(e, l), std::nullopt};
  if (!rec.meta.removed_cells.empty()) row.masked_rmse = masked_rmse(e, l, rec.meta.removed_cells);
  return row;
}

inline EvalReport run(std::span<const Method> methods, std::span<const dataset::SampleRecord> records,
                      const EvalOptions& o) {
  if (o.k_grid.empty()) throw ValidationError("empty K grid");
  for (int k : o.k_grid)
    if (k < 1) throw ValidationError("K must be >= 1, got " + std::to_string(k));
  const int jobs = static_cast<int>(records.size() * o.k_grid.size());
  std::vector<std::vector<EvalRow>> slots(jobs);
  dataset::parallel_for(jobs, o.workers, [&](int j) {
    const auto& rec = records[j / o.k_grid.size()];
    const int k = o.k_grid[j % o.k_grid.size()];
    const auto sampled = dataset::resample(rec, k, resample_seed(o.seed, rec.id, k));
    for (const auto& m : methods) slots[j].push_back(score(sampled, m, k, o));
  });
  EvalReport report;
  report.domain = o.domain;
  // Rows ordered K-major so the CSV reads as one block per density.
  for (std::size_t ki = 0; ki < o.k_grid.size(); ++ki)
    for (std::size_t r = 0; r < records.size(); ++r)
      for (auto& row : slots[r * o.k_grid.size() + ki]) report.rows.push_back(std::move(row));
  return report;
}

}  // namespace detail

/// NMSE/RMSE of every method on every record at each K of the grid, with
/// the RSS channel re-drawn from the label per (record, K).
inline EvalReport run_accuracy_vs_samples(std::span<const Method> methods,
                                          std::span<const dataset::SampleRecord> records, const EvalOptions& o) {
  return detail::run(methods, records, o);
}

/// Masked-region RMSE over the removed-building footprints. Records with an
/// empty removal are skipped and counted; a removal without footprint
/// cells is a metadata error.
inline EvalReport run_error_correction(std::span<const Method> methods,
                                       std::span<const dataset::SampleRecord> records, const EvalOptions& o) {
  std::vector<dataset::SampleRecord> usable;
  std::size_t skipped = 0;
  for (const auto& r : records) {
    if (r.meta.removed_building_ids.empty()) {
      if (!r.meta.removed_cells.empty()) throw ValidationError(r.id + ": removed cells without building ids");
      ++skipped;
      continue;
    }
    if (r.meta.removed_cells.empty()) throw ValidationError(r.id + ": removal metadata lacks footprint cells");
    usable.push_back(r);
  }
  auto report = detail::run(methods, usable, o);
  report.skipped = skipped;
  return report;
}

/// True when the median masked RMSE of `method` strictly decreases along
/// the ascending distinct K values present in the report.
inline bool masked_error_decreases(const EvalReport& report, const std::string& method) {
  std::vector<std::pair<int, double>> pts;
  for (const auto& a : report.aggregates())
    if (a.method == method && a.masked_rmse.count) pts.emplace_back(a.k, a.masked_rmse.median);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first == b.first; }), pts.end());
  if (pts.size() < 2) return false;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].second < pts[i - 1].second)) return false;
  return true;
}

/// Median-`metric` versus K, one polyline per method, log-scaled y axis.
inline std::string curve_svg(const EvalReport& report, const std::string& metric = "nmse") {
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  for (const auto& a : report.aggregates()) {
    const Summary& s = metric == "nmse" ? a.nmse : metric == "rmse" ? a.rmse : a.masked_rmse;
    if (s.count && s.median > 0.0) series[a.method].emplace_back(a.k, s.median);
  }
  double kmin = 1e300, kmax = -1e300, vmin = 1e300, vmax = -1e300;
  for (auto& [_, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (auto [k, v] : pts) {
      kmin = std::min<double>(kmin, k);
      kmax = std::max<double>(kmax, k);
      vmin = std::min(vmin, std::log10(v));
      vmax = std::max(vmax, std::log10(v));
    }
  }
  if (kmax <= kmin) kmax = kmin + 1;
  if (vmax <= vmin) vmax = vmin + 1;
  constexpr double W = 640, H = 400, M = 60;
  auto px = [&](double k) { return M + (k - kmin) / (kmax - kmin) * (W - 2 * M); };
  auto py = [&](double v) { return H - M - (std::log10(v) - vmin) / (vmax - vmin) * (H - 2 * M); };
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" font-family=\"sans-serif\" "
                "font-size=\"12\">\n<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                W, H);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
                M, H - M, W - M, H - M, M, M, M, H - M);
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">number of RSS samples K</text>\n"
                "<text x=\"15\" y=\"%g\" transform=\"rotate(-90 15 %g)\" text-anchor=\"middle\">median %s "
                "(log)</text>\n",
                W / 2, H - 15, H / 2, H / 2, metric.c_str());
  svg += buf;
  int ci = 0;
  for (const auto& [name, pts] : series) {
    const char* color = kColors[ci % 6];
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
    for (auto [k, v] : pts) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(k), py(v));
      svg += buf;
    }
    svg += "\"/>\n";
    for (auto [k, v] : pts) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"><title>K=%d %.6g</title></circle>\n",
                    px(k), py(v), color, k, v);
      svg += buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" fill=\"%s\">%s</text>\n", W - M - 90, M + 16.0 * ci, color,
                  name.c_str());
    svg += buf;
    ++ci;
  }
  svg += "</svg>\n";
  return svg;
}

/// Writes report.csv, summary.json and curve_<metric>.svg into `dir`.
inline void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.csv", report.to_csv());
  write_json(dir / "summary.json", report.summary_json());
  write_file_atomic(dir / "curve_nmse.svg", curve_svg(report, "nmse"));
  write_file_atomic(dir / "curve_rmse.svg", curve_svg(report, "rmse"));
  bool masked = false;
  for (const auto& r : report.rows) masked |= r.masked_rmse.has_value();
  if (masked) write_file_atomic(dir / "curve_masked_rmse.svg", curve_svg(report, "masked_rmse"));
}

/// One gray PNG per panel: `<id>_label.png` plus `<id>_<method>.png` for
/// each estimate. Returns the written paths, label first.
inline std::vector<std::filesystem::path> render_maps(const dataset::SampleRecord& rec,
                                                      const std::vector<std::pair<std::string, Grid<double>>>& estimates,
                                                      const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  paths.push_back(out_dir / (rec.id + "_label.png"));
  write_gray_png(rec.label, paths.back());
  for (const auto& [name, grid] : estimates) {
    if (name == "label") throw ValidationError("method name 'label' collides with the label panel");
    require_same_shape(grid, rec.label.grid(), "render " + name);
    Grid<double> clamped = grid.map([](double v) { return std::clamp(v, 0.0, 1.0); });
    paths.push_back(out_dir / (rec.id + "_" + name + ".png"));
    write_gray_png(RadioMap(std::move(clamped), Domain::gray), paths.back());
  }
  return paths;
}

}  // namespace crme::eval
