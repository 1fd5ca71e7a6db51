#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crme/cli/run_config.hpp"
#include "crme/core/files.hpp"
#include "crme/core/png_io.hpp"
#include "crme/core/seed.hpp"
#include "crme/core/units.hpp"
#include "crme/dataset/builder.hpp"
#include "crme/dataset/radiomapseer.hpp"
#include "crme/eval/experiments.hpp"
#include "crme/nn/discriminator.hpp"
#include "crme/nn/generator.hpp"
#include "crme/nn/params.hpp"
#include "crme/propagation/model.hpp"
#include "crme/training/trainer.hpp"

namespace crme::cli {

/// Where a command writes and how loudly.
struct Context {
  std::filesystem::path output_root;  // --out, else config.output
  int workers = 1;
  std::ostream* log = &std::cerr;
  std::optional<std::filesystem::path> cache_dir;  // CRME_CACHE_DIR, else <output_root>/cache
};

inline std::filesystem::path cache_root(const Context& ctx) {
  if (ctx.cache_dir) return *ctx.cache_dir;
  if (const char* env = std::getenv("CRME_CACHE_DIR"); env && *env) return env;
  return ctx.output_root / "cache";
}

/// `<root>/<command>-<hash>` where the hash covers the resolved config and
/// the command's inputs; the resolved config is stored there verbatim.
inline std::filesystem::path run_dir_for(const RunConfig& cfg, const Context& ctx, const std::string& command,
                                         const Json& inputs = Json::object()) {
  const Json key = {{"command", command}, {"config", cfg.resolved}, {"inputs", inputs}};
  return ctx.output_root / (command + "-" + RunConfig::hash_of(key));
}

inline std::filesystem::path make_run_dir(const RunConfig& cfg, const Context& ctx, const std::string& command,
                                          const Json& inputs = Json::object()) {
  const auto dir = run_dir_for(cfg, ctx, command, inputs);
  std::filesystem::create_directories(dir);
  write_json(dir / "config.json", cfg.resolved);
  return dir;
}

/// Builds (or reuses) a synthetic dataset under the cache, keyed by the
/// dataset config. A finished build is marked by its manifest.
inline std::filesystem::path cached_dataset(const dataset::DatasetConfig& dc, const Context& ctx) {
  const auto dir = cache_root(ctx) / "datasets" / RunConfig::hash_of(dataset::to_json(dc));
  if (std::filesystem::exists(dir / "manifest.json")) return dir;
  *ctx.log << "building " << dc.split << " dataset (" << dc.num_records << " records) in " << dir.string() << "\n";
  auto tmp = dir;
  tmp += ".partial";
  std::filesystem::remove_all(tmp);
  dataset::build_dataset(dc, tmp, ctx.workers);
  std::filesystem::create_directories(dir.parent_path());
  std::filesystem::remove_all(dir);
  std::filesystem::rename(tmp, dir);
  return dir;
}

/// Train and test record sets for the configured source.
inline std::pair<std::vector<dataset::SampleRecord>, std::vector<dataset::SampleRecord>> ingest_splits(
    const RunConfig& cfg) {
  const auto& ds = cfg.dataset;
  if (ds.radiomapseer_root.empty()) throw ValidationError("dataset.radiomapseer_root is required for radiomapseer");
  Rng rng(ds.seed);
  dataset::RadioMapSeerOptions opts{ds.radiomapseer_simulation, ds.num_records + cfg.eval.test_records};
  auto all = dataset::ingest_radiomapseer(ds.radiomapseer_root, ds.users, cfg.codec, rng, opts);
  std::shuffle(all.begin(), all.end(), rng);
  const auto n_test = std::min<std::size_t>(all.size(), static_cast<std::size_t>(cfg.eval.test_records));
  std::vector<dataset::SampleRecord> test(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<dataset::SampleRecord> train(all.begin() + static_cast<std::ptrdiff_t>(n_test), all.end());
  return {std::move(train), std::move(test)};
}

/// Records of the requested split: from --dataset when given, otherwise
/// from the cache (built on first use).
inline std::vector<dataset::SampleRecord> load_split(const RunConfig& cfg, const Context& ctx, bool test,
                                                     const std::optional<std::filesystem::path>& dir) {
  if (dir) return dataset::load_dataset(*dir);
  if (cfg.dataset.source == "radiomapseer") {
    auto [train, t] = ingest_splits(cfg);
    return test ? t : train;
  }
  return dataset::load_dataset(cached_dataset(test ? cfg.test_dataset_config() : cfg.dataset_config(), ctx));
}

// ---- simulate ----------------------------------------------------------

struct SimulateResult {
  std::filesystem::path run_dir;
  std::vector<std::string> warnings;
};

/// Ground-truth scenes only: `<id>_map.png`, `<id>_radio.png` (gray) and
/// `<id>_scene.json` per scene.
inline SimulateResult cmd_simulate(const RunConfig& cfg, const Context& ctx) {
  SimulateResult res;
  res.run_dir = make_run_dir(cfg, ctx, "simulate");
  const auto dc = cfg.dataset_config();
  std::vector<std::string> warnings(static_cast<std::size_t>(dc.num_records));
  dataset::parallel_for(dc.num_records, ctx.workers, [&](int i) {
    const std::uint64_t seed = derive_seed(dc.seed, {static_cast<std::uint64_t>(i)});
    Rng rng(seed);
    const GeoMap geo = dataset::generate_city(dc.city, rng);
    const TransmitterField tx = dataset::place_transmitters(geo, dc.transmitters, rng);
    const NoiseMap noise = NoiseMap::constant(geo.width(), geo.height(), dbm_to_watts(dc.noise_dbm));
    auto params = dc.propagation;
    params.rng_seed = derive_seed(seed, {0x5ad0});
    const RadioMap linear = propagation::simulate_radio_map(tx, geo, noise, params);
    const RadioMap gray = dataset::to_gray(linear_to_db(linear, dc.codec.floor_dbm), dc.codec);
    const std::string id = dataset::record_id(i);
    if (tx.transmitters().empty()) warnings[i] = id + ": no transmitters, map equals the noise floor";
    write_gray_png(RadioMap(dataset::occupancy_image(geo), Domain::gray), res.run_dir / (id + "_map.png"));
    write_gray_png(gray, res.run_dir / (id + "_radio.png"));
    Json txs = Json::array();
    for (const auto& t : tx.transmitters())
      txs.push_back({{"x", t.cell.x}, {"y", t.cell.y}, {"power_dbm", watts_to_dbm(t.power_w)}});
    write_json(res.run_dir / (id + "_scene.json"),
               {{"id", id}, {"seed", seed}, {"geo", geo_sidecar(geo)}, {"transmitters", txs}});
  });
  for (auto& w : warnings)
    if (!w.empty()) {
      *ctx.log << "warning: " << w << "\n";
      res.warnings.push_back(std::move(w));
    }
  return res;
}

// ---- build-dataset -----------------------------------------------------

/// Writes `<run>/train` and `<run>/test` datasets with manifests.
inline std::filesystem::path cmd_build_dataset(const RunConfig& cfg, const Context& ctx) {
  const auto run = make_run_dir(cfg, ctx, "build-dataset");
  if (cfg.dataset.source == "radiomapseer") {
    auto [train, test] = ingest_splits(cfg);
    const Json extra = {{"source_root", cfg.dataset.radiomapseer_root},
                        {"simulation", cfg.dataset.radiomapseer_simulation}};
    dataset::write_dataset(train, run / "train", extra);
    dataset::write_dataset(test, run / "test", extra);
  } else {
    dataset::build_dataset(cfg.dataset_config(), run / "train", ctx.workers);
    dataset::build_dataset(cfg.test_dataset_config(), run / "test", ctx.workers);
  }
  *ctx.log << "datasets written to " << run.string() << "\n";
  return run;
}

// ---- train -------------------------------------------------------------

inline std::uint64_t generator_init_seed(const RunConfig& cfg) { return derive_seed(cfg.train.seed, {0x9e1}); }
inline std::uint64_t discriminator_init_seed(const RunConfig& cfg) { return derive_seed(cfg.train.seed, {0xd15}); }

struct TrainOutput {
  std::filesystem::path run_dir;
  std::filesystem::path generator_checkpoint;
  training::TrainResult<float> result;
};

/// Adversarial training (or the L2-only ablation) in float precision.
/// Checkpoints go to `<run>/checkpoints`, the per-epoch log to train_log.csv.
inline TrainOutput cmd_train(const RunConfig& cfg, const Context& ctx,
                             const std::optional<std::filesystem::path>& dataset_dir = std::nullopt) {
  const Json inputs = dataset_dir ? Json{{"dataset", std::filesystem::absolute(*dataset_dir).string()}} : Json::object();
  TrainOutput out;
  out.run_dir = make_run_dir(cfg, ctx, "train", inputs);
  const auto records = load_split(cfg, ctx, false, dataset_dir);
  const auto examples = training::to_examples<float>(records);
  const nn::Generator<float> gen(cfg.generator_spec);
  training::TrainHooks<float> hooks;
  hooks.checkpoint_dir = out.run_dir / "checkpoints";
  hooks.on_epoch = [&](const training::EpochLog& e) {
    *ctx.log << "epoch " << e.epoch << "  loss_g " << e.loss_g << "  loss_d " << e.loss_d << "  (" << e.seconds
             << " s)\n";
  };
  auto gp = gen.init_params(generator_init_seed(cfg));
  if (cfg.train_mode == TrainMode::gan) {
    const nn::Discriminator<float> disc(cfg.discriminator_spec);
    out.result = training::train<float>(examples, gen, std::move(gp), disc, disc.init_params(discriminator_init_seed(cfg)),
                                        cfg.train, hooks);
  } else {
    out.result = training::train_l2_only<float>(examples, gen, std::move(gp), cfg.train, hooks);
  }
  write_file_atomic(out.run_dir / "train_log.csv", out.result.log.to_csv());
  write_json(out.run_dir / "train_summary.json", {{"records", records.size()},
                                                  {"mode", cfg.train_mode == TrainMode::gan ? "gan" : "l2-only"},
                                                  {"d_updates", out.result.d_updates},
                                                  {"g_updates", out.result.g_updates}});
  out.generator_checkpoint = *hooks.checkpoint_dir / "generator_final.bin";
  return out;
}

// ---- evaluate / compare / render ---------------------------------------

/// Generator parameters plus the spec stored in the checkpoint header.
inline std::pair<nn::GeneratorSpec, nn::ModelParams<float>> load_generator(const std::filesystem::path& path) {
  const auto header = nn::parse_checkpoint_header(read_file(path), path.string()).header;
  const auto spec = nn::generator_spec_from_json(header.at("spec"));
  auto params = nn::Generator<float>(spec).layout();
  nn::load_params_into(path, params);
  return {spec, std::move(params)};
}

struct NamedCheckpoint {
  std::string name;
  std::filesystem::path path;
};

/// "name=path" or a bare path (named by its parent run directory).
inline NamedCheckpoint parse_named_checkpoint(const std::string& s) {
  const auto eq = s.find('=');
  if (eq != std::string::npos && eq > 0) return {s.substr(0, eq), s.substr(eq + 1)};
  return {"gan-crme", s};
}

inline std::vector<eval::Method> build_methods(const RunConfig& cfg, const std::vector<NamedCheckpoint>& models,
                                               bool with_baselines) {
  std::vector<eval::Method> methods;
  for (const auto& m : models) {
    auto [spec, params] = load_generator(m.path);
    methods.push_back(eval::generator_method<float>(m.name, spec, std::move(params)));
  }
  if (with_baselines)
    for (const auto& b : cfg.eval.baselines) methods.push_back(eval::baseline_method(b));
  return methods;
}

inline Json checkpoint_inputs(const std::vector<NamedCheckpoint>& models,
                              const std::optional<std::filesystem::path>& dataset_dir) {
  Json j = Json::object();
  Json ms = Json::array();
  for (const auto& m : models) ms.push_back({m.name, crc32_of_file(m.path)});
  j["models"] = ms;
  if (dataset_dir) j["dataset"] = std::filesystem::absolute(*dataset_dir).string();
  return j;
}

/// Panels for the first `render_count` records at the largest K.
inline void render_records(const RunConfig& cfg, const std::vector<eval::Method>& methods,
                           const std::vector<dataset::SampleRecord>& records, const std::filesystem::path& dir) {
  const int k = *std::max_element(cfg.eval.k_grid.begin(), cfg.eval.k_grid.end());
  const auto n = std::min<std::size_t>(records.size(), static_cast<std::size_t>(std::max(cfg.eval.render_count, 0)));
  for (std::size_t i = 0; i < n; ++i) {
    const auto rec = dataset::resample(records[i], k, eval::resample_seed(cfg.eval.seed, records[i].id, k));
    std::vector<std::pair<std::string, Grid<double>>> panels;
    for (const auto& m : methods) panels.emplace_back(m.name, m.estimate(rec));
    eval::render_maps(rec, panels, dir);
    write_gray_png(RadioMap(rec.rss, Domain::gray), dir / (rec.id + "_input_rss.png"));
    write_gray_png(RadioMap(rec.map, Domain::gray), dir / (rec.id + "_input_map.png"));
  }
}

struct EvaluateOutput {
  std::filesystem::path run_dir;
  eval::EvalReport accuracy;
  std::optional<eval::EvalReport> error_correction;
};

/// Accuracy-vs-K report for the models and the configured baselines, the
/// masked error-correction report when the test set is flawed, and renders.
inline EvaluateOutput evaluate_methods(const RunConfig& cfg, const Context& ctx, const std::string& command,
                                       const std::vector<NamedCheckpoint>& models,
                                       const std::optional<std::filesystem::path>& dataset_dir) {
  EvaluateOutput out;
  out.run_dir = make_run_dir(cfg, ctx, command, checkpoint_inputs(models, dataset_dir));
  const auto records = load_split(cfg, ctx, true, dataset_dir);
  const auto methods = build_methods(cfg, models, true);
  const auto opts = cfg.eval_options(ctx.workers);
  out.accuracy = eval::run_accuracy_vs_samples(methods, records, opts);
  eval::write_report(out.accuracy, out.run_dir / "accuracy");
  const bool flawed = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.meta.flawed(); });
  if (flawed) {
    out.error_correction = eval::run_error_correction(methods, records, opts);
    eval::write_report(*out.error_correction, out.run_dir / "error_correction");
    Json verdict = Json::object();
    for (const auto& m : methods) verdict[m.name] = eval::masked_error_decreases(*out.error_correction, m.name);
    write_json(out.run_dir / "error_correction" / "decreasing.json", verdict);
  }
  render_records(cfg, methods, records, out.run_dir / "renders");
  return out;
}

inline EvaluateOutput cmd_evaluate(const RunConfig& cfg, const Context& ctx, const std::filesystem::path& checkpoint,
                                   const std::optional<std::filesystem::path>& dataset_dir = std::nullopt) {
  return evaluate_methods(cfg, ctx, "evaluate", {parse_named_checkpoint(checkpoint.string())}, dataset_dir);
}

/// Markdown table: one row per (method, K) with median/mean NMSE and
/// median RMSE.
inline std::string comparison_table(const eval::EvalReport& report) {
  std::string out = "| method | K | median NMSE | mean NMSE | median RMSE |\n|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& a : report.aggregates()) {
    std::snprintf(buf, sizeof buf, "| %s | %d | %.6g | %.6g | %.6g |\n", a.method.c_str(), a.k, a.nmse.median,
                  a.nmse.mean, a.rmse.median);
    out += buf;
  }
  return out;
}

inline EvaluateOutput cmd_compare(const RunConfig& cfg, const Context& ctx, const std::vector<std::string>& checkpoints,
                                  const std::optional<std::filesystem::path>& dataset_dir = std::nullopt) {
  std::vector<NamedCheckpoint> models;
  for (const auto& c : checkpoints) models.push_back(parse_named_checkpoint(c));
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (models[i].name == models[j].name) {
        throw ValidationError("duplicate model name '" + models[i].name + "'; use name=path");
      }
  auto out = evaluate_methods(cfg, ctx, "compare", models, dataset_dir);
  const std::string table = comparison_table(out.accuracy);
  write_file_atomic(out.run_dir / "comparison.md", table);
  std::cout << table;
  return out;
}

inline std::filesystem::path cmd_render(const RunConfig& cfg, const Context& ctx,
                                        const std::vector<std::string>& checkpoints,
                                        const std::optional<std::filesystem::path>& dataset_dir = std::nullopt) {
  std::vector<NamedCheckpoint> models;
  for (const auto& c : checkpoints) models.push_back(parse_named_checkpoint(c));
  const auto run = make_run_dir(cfg, ctx, "render", checkpoint_inputs(models, dataset_dir));
  const auto records = load_split(cfg, ctx, true, dataset_dir);
  render_records(cfg, build_methods(cfg, models, true), records, run);
  return run;
}

}  // namespace crme::cli
