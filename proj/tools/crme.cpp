// crme: simulate | build-dataset | train | evaluate | compare | render

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "crme/cli/commands.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  int workers = 1;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
  sub->add_option("--set", f.sets, "Override a config key: section.key=value (repeatable)");
  sub->add_option("--out", f.out, "Output root (default: config 'output')");
  sub->add_option("--workers", f.workers, "Parallel workers for dataset building and evaluation")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "Top-level seed; section seeds derive from it");
  std::string keys = "\nConfig keys accepted by --set:\n";
  for (const auto& k : crme::cli::overridable_keys()) keys += "  " + k + "\n";
  keys += "\nEnvironment: CRME_CACHE_DIR sets the dataset cache directory.\n";
  sub->footer(keys);
}

std::pair<crme::cli::RunConfig, crme::cli::Context> resolve(const CommonFlags& f) {
  std::optional<std::filesystem::path> path;
  if (!f.config.empty()) path = f.config;
  auto cfg = crme::cli::load_config(path, f.sets, f.seed);
  crme::cli::Context ctx;
  ctx.output_root = f.out.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(f.out);
  ctx.workers = f.workers;
  return {std::move(cfg), std::move(ctx)};
}

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

void report_error(const char* kind, const std::string& message) {
  crme::Json j = {{"error", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radio map estimation from sparse RSS samples and a city map"};
  app.require_subcommand(1);

  CommonFlags f;
  std::string dataset, checkpoint;
  std::vector<std::string> checkpoints;

  auto* simulate = app.add_subcommand("simulate", "Simulate ground-truth radio maps and write PNGs");
  add_common(simulate, f);

  auto* build = app.add_subcommand("build-dataset", "Build train/test datasets (synthetic or RadioMapSeer)");
  add_common(build, f);

  auto* train = app.add_subcommand("train", "Train the generator (adversarial or L2-only)");
  add_common(train, f);
  train->add_option("--dataset", dataset, "Dataset directory (default: cached synthetic build)");

  auto* evaluate = app.add_subcommand("evaluate", "Metrics vs. K, error-correction study and renders");
  add_common(evaluate, f);
  evaluate->add_option("--checkpoint", checkpoint, "Generator checkpoint ([name=]path)")->required();
  evaluate->add_option("--dataset", dataset, "Test dataset directory (default: cached synthetic build)");

  auto* compare = app.add_subcommand("compare", "Side-by-side table of models and baselines");
  add_common(compare, f);
  compare->add_option("--checkpoint", checkpoints, "Generator checkpoints as name=path (repeatable)");
  compare->add_option("--dataset", dataset, "Test dataset directory (default: cached synthetic build)");

  auto* render = app.add_subcommand("render", "Write label and estimate panels as gray PNGs");
  add_common(render, f);
  render->add_option("--checkpoint", checkpoints, "Generator checkpoints as name=path (repeatable)");
  render->add_option("--dataset", dataset, "Test dataset directory (default: cached synthetic build)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto [cfg, ctx] = resolve(f);
    if (simulate->parsed()) {
      const auto r = crme::cli::cmd_simulate(cfg, ctx);
      std::cout << r.run_dir.string() << "\n";
    } else if (build->parsed()) {
      std::cout << crme::cli::cmd_build_dataset(cfg, ctx).string() << "\n";
    } else if (train->parsed()) {
      const auto r = crme::cli::cmd_train(cfg, ctx, opt_path(dataset));
      std::cout << r.generator_checkpoint.string() << "\n";
    } else if (evaluate->parsed()) {
      const auto r = crme::cli::cmd_evaluate(cfg, ctx, checkpoint, opt_path(dataset));
      std::cout << crme::cli::comparison_table(r.accuracy);
      std::cout << r.run_dir.string() << "\n";
    } else if (compare->parsed()) {
      const auto r = crme::cli::cmd_compare(cfg, ctx, checkpoints, opt_path(dataset));
      std::cout << r.run_dir.string() << "\n";
    } else if (render->parsed()) {
      std::cout << crme::cli::cmd_render(cfg, ctx, checkpoints, opt_path(dataset)).string() << "\n";
    }
  } catch (const crme::ValidationError& e) {
    report_error("validation", e.what());
    return 2;
  } catch (const crme::IoError& e) {
    report_error("io", e.what());
    return 3;
  } catch (const crme::NumericError& e) {
    report_error("numeric", e.what());
    return 4;
  } catch (const crme::Error& e) {
    report_error("error", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 0;
}
