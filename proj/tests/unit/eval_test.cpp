#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "crme/core/png_io.hpp"
#include "crme/dataset/builder.hpp"
#include "crme/eval/baselines.hpp"
#include "crme/eval/experiments.hpp"
#include "crme/eval/metrics.hpp"

namespace crme::eval {
namespace {

Grid<double> random_grid(int w, int h, std::uint64_t seed, double lo = 0.05, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Grid<double> g(w, h);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

std::vector<dataset::SampleRecord> small_set(int n, std::uint64_t seed, bool flawed) {
  dataset::DatasetConfig dc;
  dc.num_records = n;
  dc.seed = seed;
  dc.city.width = dc.city.height = 32;
  dc.city.max_side = 8;
  dc.users = {12, 40};
  if (flawed) dc.flaw = dataset::FlawSpec{{1, 2}};
  std::vector<dataset::SampleRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(dataset::synthesize_record(dc, i));
  return out;
}

TEST(Metrics, HandExamples) {
  Grid<double> label(2, 2, std::vector<double>{0.2, 0.4, 0.6, 0.8});
  EXPECT_EQ(nmse(label, label), 0.0);
  EXPECT_NEAR(nmse(Grid<double>(2, 2, 0.0), label), 1.0, 1e-12);
  EXPECT_NEAR(nmse(label.map([](double v) { return 2.0 * v; }), label), 1.0, 1e-12);
  EXPECT_NEAR(rmse(label.map([](double v) { return v + 0.1; }), label), 0.1, 1e-12);
  Grid<double> est(2, 2, std::vector<double>{0.3, 0.7, 0.6, 0.8});
  EXPECT_NEAR(rmse(est, label), std::sqrt(0.025), 1e-12);
}

TEST(Metrics, AllZeroLabelIsNumericError) {
  EXPECT_THROW(nmse(Grid<double>(2, 2, 0.5), Grid<double>(2, 2, 0.0)), NumericError);
}

TEST(Metrics, ShapeMismatchAndEmptyMask) {
  EXPECT_THROW(rmse(Grid<double>(2, 2, 0.5), Grid<double>(3, 2, 0.5)), ShapeError);
  const std::vector<Cell> none;
  EXPECT_THROW(masked_rmse(Grid<double>(2, 2), Grid<double>(2, 2), none), NumericError);
}

TEST(Metrics, NmseInvariantToJointScaling) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto l = random_grid(6, 5, s), e = random_grid(6, 5, s + 100);
    const double c = 0.1 + 0.4 * static_cast<double>(s);
    const auto scale = [c](double v) { return c * v; };
    EXPECT_NEAR(nmse(e.map(scale), l.map(scale)), nmse(e, l), 1e-12);
  }
}

TEST(Metrics, RmseIsSymmetricAndSatisfiesTriangle) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = random_grid(5, 5, s), b = random_grid(5, 5, s + 1000), c = random_grid(5, 5, s + 2000);
    EXPECT_DOUBLE_EQ(rmse(a, b), rmse(b, a));
    EXPECT_LE(rmse(a, c), rmse(a, b) + rmse(b, c) + 1e-15);
  }
}

TEST(Metrics, MaskedRmseOnlyLooksAtMask) {
  Grid<double> label(3, 1, std::vector<double>{0.5, 0.5, 0.5});
  Grid<double> est(3, 1, std::vector<double>{0.5, 0.9, 0.1});
  const std::vector<Cell> mask = {{0, 0}};
  EXPECT_EQ(masked_rmse(est, label, mask), 0.0);
  const std::vector<Cell> both = {{1, 0}, {2, 0}};
  EXPECT_NEAR(masked_rmse(est, label, both), 0.4, 1e-12);
}

TEST(Summary, MedianMeanStd) {
  const auto s = summarize({3.0, 1.0, 2.0, 10.0});
  EXPECT_EQ(s.count, 4u);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_NEAR(s.std, std::sqrt((1.0 + 9.0 + 4.0 + 36.0) / 4.0), 1e-12);
}

TEST(Idw, OneSampleGivesConstantMap) {
  const auto g = idw_estimate({{{2, 3}, 0.4}}, 6, 6, 2.0);
  for (double v : g.values()) EXPECT_DOUBLE_EQ(v, 0.4);
}

TEST(Idw, MatchesBruteForceAndIsExactAtSamples) {
  const std::vector<Sample> s = {{{0, 0}, 0.2}, {{5, 1}, 0.9}, {{2, 4}, 0.5}, {{4, 4}, 0.1}};
  const auto g = idw_estimate(s, 6, 6, 2.0);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      double num = 0.0, den = 0.0;
      bool at_sample = false;
      for (const auto& p : s) {
        const double d2 = std::pow(x - p.cell.x, 2) + std::pow(y - p.cell.y, 2);
        if (d2 == 0.0) {
          EXPECT_DOUBLE_EQ(g(x, y), p.value);
          at_sample = true;
          break;
        }
        num += p.value / d2;
        den += 1.0 / d2;
      }
      if (!at_sample) EXPECT_NEAR(g(x, y), num / den, 1e-12);
    }
}

TEST(Kernel, StaysWithinSampleRange) {
  const std::vector<Sample> s = {{{0, 0}, 0.2}, {{7, 7}, 0.9}, {{3, 5}, 0.5}};
  const auto g = kernel_estimate(s, 8, 8, 2.0);
  for (double v : g.values()) {
    EXPECT_GE(v, 0.2 - 1e-12);
    EXPECT_LE(v, 0.9 + 1e-12);
  }
  // Tiny bandwidth underflows far from samples; nearest sample takes over.
  const auto far = kernel_estimate({{{0, 0}, 0.3}}, 64, 64, 0.05);
  EXPECT_DOUBLE_EQ(far(63, 63), 0.3);
}

TEST(Kriging, InterpolatesSamplesWithoutNugget) {
  const std::vector<Sample> s = {{{1, 1}, 0.2}, {{6, 2}, 0.7}, {{3, 6}, 0.5}, {{7, 7}, 0.4}};
  const auto g = kriging_estimate(s, 8, 8, Variogram{5.0, 0.01, 0.0});
  for (const auto& p : s) EXPECT_NEAR(g(p.cell.x, p.cell.y), p.value, 1e-9);
  EXPECT_THROW(kriging_estimate({{{1, 1}, 0.2}, {{2, 2}, 0.3}}, 8, 8, Variogram{5.0, 0.01, 0.0}),
               ValidationError);
}

TEST(Baselines, SpecJsonRoundTripAndValidation) {
  const auto k = BaselineSpec::kriging();
  EXPECT_EQ(to_json(baseline_spec_from_json(to_json(k))), to_json(k));
  EXPECT_THROW(baseline_spec_from_json(Json{{"method", "idw"}, {"bogus", 1}}), ValidationError);
  EXPECT_THROW(baseline_spec_from_json(Json{{"method", "splines"}}), ValidationError);
}

TEST(Baselines, IdwImprovesWithDensityOnAverage) {
  const auto records = small_set(100, 31, false);
  std::vector<double> sparse, dense;
  for (const auto& rec : records) {
    const auto a = dataset::resample(rec, 16, resample_seed(9, rec.id, 16));
    const auto b = dataset::resample(rec, 64, resample_seed(9, rec.id, 64));
    sparse.push_back(nmse(baseline_estimate(a, BaselineSpec::idw()), rec.label.grid()));
    dense.push_back(nmse(baseline_estimate(b, BaselineSpec::idw()), rec.label.grid()));
  }
  EXPECT_LE(summarize(dense).median, summarize(sparse).median);
}

TEST(Experiments, IdentityOracleScoresZero) {
  const auto records = small_set(4, 5, true);
  const std::vector<Method> m = {identity_oracle()};
  EvalOptions o;
  o.k_grid = {3, 18};
  const auto acc = run_accuracy_vs_samples(m, records, o);
  const auto err = run_error_correction(m, records, o);
  for (const auto& r : acc.rows) {
    EXPECT_EQ(r.nmse, 0.0);
    EXPECT_EQ(r.rmse, 0.0);
  }
  for (const auto& r : err.rows) EXPECT_EQ(r.masked_rmse.value(), 0.0);
}

TEST(Experiments, AggregatesMatchRecomputation) {
  const auto records = small_set(6, 8, false);
  const std::vector<Method> m = {baseline_method(BaselineSpec::idw()), baseline_method(BaselineSpec::kernel())};
  EvalOptions o;
  o.k_grid = {10, 30};
  const auto report = run_accuracy_vs_samples(m, records, o);
  ASSERT_EQ(report.rows.size(), 6u * 2u * 2u);
  for (const auto& a : report.aggregates()) {
    std::vector<double> v;
    for (const auto& r : report.rows)
      if (r.method == a.method && r.k == a.k) v.push_back(r.nmse);
    const auto s = summarize(v);
    EXPECT_NEAR(a.nmse.median, s.median, 1e-12);
    EXPECT_NEAR(a.nmse.mean, s.mean, 1e-12);
  }
}

TEST(Experiments, DeterministicAcrossWorkerCounts) {
  const auto records = small_set(5, 12, false);
  const std::vector<Method> m = {baseline_method(BaselineSpec::idw())};
  EvalOptions o;
  o.k_grid = {8, 20};
  o.seed = 3;
  const auto a = run_accuracy_vs_samples(m, records, o);
  o.workers = 3;
  const auto b = run_accuracy_vs_samples(m, records, o);
  EXPECT_EQ(a.to_csv(), b.to_csv());
}

TEST(Experiments, DuplicateKIsScoredTwice) {
  const auto records = small_set(2, 2, false);
  const std::vector<Method> m = {identity_oracle()};
  EvalOptions o;
  o.k_grid = {5, 5};
  EXPECT_EQ(run_accuracy_vs_samples(m, records, o).rows.size(), 4u);
  o.k_grid = {0};
  EXPECT_THROW(run_accuracy_vs_samples(m, records, o), ValidationError);
}

TEST(Experiments, ErrorCorrectionSkipsUnflawedAndRejectsBadMetadata) {
  auto records = small_set(3, 4, false);
  const std::vector<Method> m = {identity_oracle()};
  const auto report = run_error_correction(m, records, {});
  EXPECT_TRUE(report.rows.empty());
  EXPECT_EQ(report.skipped, 3u);
  records[0].meta.removed_building_ids = {0};
  EXPECT_THROW(run_error_correction(m, records, {}), ValidationError);
}

TEST(Experiments, MaskedErrorDecreaseCheck) {
  EvalReport r;
  r.rows = {{"a", "m", 18, true, 0, 0, 0.3}, {"a", "m", 62, true, 0, 0, 0.2}};
  EXPECT_TRUE(masked_error_decreases(r, "m"));
  r.rows[1].masked_rmse = 0.3;
  EXPECT_FALSE(masked_error_decreases(r, "m"));
}

TEST(Render, LabelPanelIsBitExactAndNamesFollowMethods) {
  const auto rec = small_set(1, 6, false)[0];
  const auto dir = std::filesystem::temp_directory_path() / "crme_eval_render";
  std::filesystem::remove_all(dir);
  const auto paths = render_maps(
      rec, {{"idw", baseline_estimate(rec, BaselineSpec::idw())}, {"kernel", Grid<double>(32, 32, 0.5)}}, dir);
  ASSERT_EQ(paths.size(), 3u);
  EXPECT_EQ(paths[0].filename(), rec.id + "_label.png");
  EXPECT_EQ(paths[1].filename(), rec.id + "_idw.png");
  EXPECT_EQ(read_gray_png(paths[0]).grid(), rec.label.grid().map([](double v) { return gray_to_pixel(v) / 255.0; }));
  EXPECT_THROW(render_maps(rec, {{"label", rec.label.grid()}}, dir), ValidationError);
}

TEST(Report, WritesCsvSummaryAndCurves) {
  const auto records = small_set(3, 7, true);
  const std::vector<Method> m = {baseline_method(BaselineSpec::idw())};
  EvalOptions o;
  o.k_grid = {6, 24};
  const auto report = run_error_correction(m, records, o);
  const auto dir = std::filesystem::temp_directory_path() / "crme_eval_report";
  std::filesystem::remove_all(dir);
  write_report(report, dir);
  for (const char* f : {"report.csv", "summary.json", "curve_nmse.svg", "curve_rmse.svg", "curve_masked_rmse.svg"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(read_json(dir / "summary.json").at("groups").size(), 2u);
}

}  // namespace
}  // namespace crme::eval
