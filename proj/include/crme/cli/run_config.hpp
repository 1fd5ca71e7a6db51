#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/seed.hpp"
#include "crme/dataset/builder.hpp"
#include "crme/dataset/codec.hpp"
#include "crme/eval/baselines.hpp"
#include "crme/eval/experiments.hpp"
#include "crme/nn/discriminator.hpp"
#include "crme/nn/generator.hpp"
#include "crme/propagation/model.hpp"
#include "crme/training/trainer.hpp"

namespace crme::cli {

enum class TrainMode { gan, l2_only };

struct DatasetSection {
  std::string source = "synthetic";  // or "radiomapseer"
  std::string radiomapseer_root;
  std::string radiomapseer_simulation = "DPM";
  int num_records = 2000;
  std::uint64_t seed = 0;
  std::string split = "train";
  double noise_dbm = -120.0;
  dataset::UserCountDistribution users{12, 80};
  dataset::CityConfig city;
  dataset::TransmitterConfig transmitters;
  std::optional<dataset::FlawSpec> flaw;
};

struct EvalSection {
  std::vector<int> k_grid = {18, 62};
  std::uint64_t seed = 0;
  int test_records = 100;
  std::uint64_t test_seed = 0;
  std::string domain = "gray";
  std::vector<eval::BaselineSpec> baselines = {eval::BaselineSpec::idw(), eval::BaselineSpec::kernel(),
                                               eval::BaselineSpec::kriging()};
  int render_count = 4;
};

/// Everything a command needs. Parsed from a JSON document whose sections
/// mirror the fields below; `resolved` is that document after defaults,
/// overrides and derived seeds were applied, and is what gets persisted.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output = "runs";
  propagation::PropagationParams propagation;
  dataset::GrayCodec codec;
  DatasetSection dataset;
  nn::GeneratorSpec generator_spec;
  nn::DiscriminatorSpec discriminator_spec;
  training::TrainConfig train;
  TrainMode train_mode = TrainMode::gan;
  EvalSection eval;
  Json resolved;

  dataset::DatasetConfig dataset_config() const {
    dataset::DatasetConfig c;
    c.num_records = dataset.num_records;
    c.seed = dataset.seed;
    c.city = dataset.city;
    c.transmitters = dataset.transmitters;
    c.propagation = propagation;
    c.codec = codec;
    c.users = dataset.users;
    c.noise_dbm = dataset.noise_dbm;
    c.flaw = dataset.flaw;
    c.split = dataset.split;
    return c;
  }

  dataset::DatasetConfig test_dataset_config() const {
    auto c = dataset_config();
    c.num_records = eval.test_records;
    c.seed = eval.test_seed;
    c.split = "test";
    return c;
  }

  eval::EvalOptions eval_options(int workers) const {
    return {eval.k_grid, eval.seed, workers, eval::metric_domain_from_string(eval.domain), codec};
  }

  /// 16 hex digits naming the run directory.
  std::string hash() const { return hash_of(resolved); }

  static std::string hash_of(const Json& j) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
  }
};

/// The full default document. Section seeds are absent here; they are
/// derived from the top-level seed unless given explicitly.
inline Json default_config_json() {
  const DatasetSection ds;
  const EvalSection ev;
  Json baselines = Json::array();
  for (const auto& b : ev.baselines) baselines.push_back(eval::to_json(b));
  Json train = training::to_json(training::TrainConfig{});
  train.erase("seed");
  train["mode"] = "gan";
  return {{"seed", 0},
          {"output", "runs"},
          {"propagation", propagation::to_json(propagation::PropagationParams{})},
          {"codec", dataset::to_json(dataset::GrayCodec{})},
          {"dataset",
           {{"source", ds.source},
            {"radiomapseer_root", ds.radiomapseer_root},
            {"radiomapseer_simulation", ds.radiomapseer_simulation},
            {"num_records", ds.num_records},
            {"split", ds.split},
            {"noise_dbm", ds.noise_dbm},
            {"users", {{"low", ds.users.low}, {"high", ds.users.high}}},
            {"city", dataset::to_json(ds.city)},
            {"transmitters", dataset::to_json(ds.transmitters)},
            {"flaw", nullptr}}},
          {"generator_spec", nn::to_json(nn::GeneratorSpec{})},
          {"discriminator_spec", nn::to_json(nn::DiscriminatorSpec{})},
          {"train", train},
          {"eval",
           {{"k_grid", ev.k_grid},
            {"test_records", ev.test_records},
            {"domain", ev.domain},
            {"baselines", baselines},
            {"render_count", ev.render_count}}}};
}

namespace detail {

inline const Json& flaw_reference() {
  static const Json j = {{"min_removed", 1}, {"max_removed", 3}};
  return j;
}

// Keys that may appear without being in the default document.
inline bool optional_key(const std::string& path) {
  return path == "dataset.seed" || path == "train.seed" || path == "eval.seed" || path == "eval.test_seed";
}

inline void collect_unknown(const Json& given, const Json& reference, const std::string& prefix,
                            std::vector<std::string>& out) {
  if (!given.is_object()) return;
  for (const auto& [key, v] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) {
      if (!optional_key(path)) out.push_back(path);
      continue;
    }
    const Json& ref = reference.at(key);
    if (path == "dataset.flaw") {
      collect_unknown(v, flaw_reference(), path, out);
    } else if (path == "eval.baselines" && v.is_array()) {
      const Json base_ref = eval::to_json(eval::BaselineSpec{});
      for (std::size_t i = 0; i < v.size(); ++i)
        collect_unknown(v[i], base_ref, path + "[" + std::to_string(i) + "]", out);
    } else if (ref.is_object()) {
      collect_unknown(v, ref, path, out);
    }
  }
}

inline dataset::CityConfig city_from_json(const Json& j) {
  dataset::CityConfig c;
  c.width = j.at("width");
  c.height = j.at("height");
  c.meters_per_cell = j.at("meters_per_cell");
  c.min_buildings = j.at("min_buildings");
  c.max_buildings = j.at("max_buildings");
  c.min_side = j.at("min_side");
  c.max_side = j.at("max_side");
  c.min_gap = j.at("min_gap");
  return c;
}

inline std::uint64_t section_seed(const Json& section, const char* key, std::uint64_t root, std::uint64_t tag) {
  if (section.contains(key)) return section.at(key).get<std::uint64_t>();
  return derive_seed(root, {tag});
}

}  // namespace detail

/// Sets `section.key[.sub]=value`; the value is parsed as JSON when it
/// parses, otherwise taken as a string.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--set expects section.key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ValidationError("--set: empty key in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = Json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

/// Defaults <- file document <- overrides <- explicit seed, then validated.
/// Every unknown key is reported in one error.
inline RunConfig resolve_config(const Json& user, const std::vector<std::string>& overrides = {},
                                std::optional<std::uint64_t> seed_override = std::nullopt) {
  Json given = user.is_null() ? Json::object() : user;
  if (!given.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& o : overrides) apply_override(given, o);
  if (seed_override) given["seed"] = *seed_override;

  const Json defaults = default_config_json();
  std::vector<std::string> unknown;
  detail::collect_unknown(given, defaults, "", unknown);
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }

  Json doc = defaults;
  // Merge by section so a partial section keeps the remaining defaults.
  for (const auto& [key, v] : given.items()) {
    if (v.is_object() && doc[key].is_object()) {
      for (const auto& [k2, v2] : v.items()) {
        if (v2.is_object() && doc[key].contains(k2) && doc[key][k2].is_object()) doc[key][k2].update(v2);
        else doc[key][k2] = v2;
      }
    } else {
      doc[key] = v;
    }
  }

  RunConfig c;
  std::vector<std::string> errors;
  auto guard = [&](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errors.push_back(std::string(section) + ": " + e.what());
    } catch (const Json::exception& e) {
      errors.push_back(std::string(section) + ": " + e.what());
    }
  };

  guard("seed", [&] { c.seed = doc.at("seed").get<std::uint64_t>(); });
  guard("output", [&] { c.output = doc.at("output").get<std::string>(); });
  guard("propagation", [&] { c.propagation = propagation::propagation_params_from_json(doc.at("propagation")); });
  guard("codec", [&] { c.codec = dataset::gray_codec_from_json(doc.at("codec")); });
  guard("dataset", [&] {
    const Json& d = doc.at("dataset");
    auto& s = c.dataset;
    s.source = d.at("source");
    if (s.source != "synthetic" && s.source != "radiomapseer") {
      throw ValidationError("source must be 'synthetic' or 'radiomapseer'");
    }
    s.radiomapseer_root = d.at("radiomapseer_root");
    s.radiomapseer_simulation = d.at("radiomapseer_simulation");
    s.num_records = d.at("num_records");
    if (s.num_records < 0) throw ValidationError("num_records must be >= 0");
    s.seed = detail::section_seed(d, "seed", c.seed, 0xda7a);
    doc["dataset"]["seed"] = s.seed;
    s.split = d.at("split");
    s.noise_dbm = d.at("noise_dbm");
    s.users = {d.at("users").at("low"), d.at("users").at("high")};
    s.users.validate();
    s.city = detail::city_from_json(d.at("city"));
    s.transmitters = {d.at("transmitters").at("min_count"), d.at("transmitters").at("max_count"),
                      d.at("transmitters").at("power_dbm")};
    if (s.transmitters.min_count < 0 || s.transmitters.max_count < s.transmitters.min_count) {
      throw ValidationError("transmitter count range invalid");
    }
    if (!d.at("flaw").is_null()) {
      Json f = detail::flaw_reference();
      f.update(d.at("flaw"));
      doc["dataset"]["flaw"] = f;
      s.flaw = dataset::FlawSpec{{f.at("min_removed"), f.at("max_removed")}};
      if (s.flaw->count.low < 0 || s.flaw->count.high < s.flaw->count.low) {
        throw ValidationError("flaw removal range invalid");
      }
    }
  });
  guard("generator_spec", [&] { c.generator_spec = nn::generator_spec_from_json(doc.at("generator_spec")); });
  guard("discriminator_spec",
        [&] { c.discriminator_spec = nn::discriminator_spec_from_json(doc.at("discriminator_spec")); });
  guard("train", [&] {
    Json t = doc.at("train");
    const std::string mode = t.at("mode");
    if (mode == "gan") c.train_mode = TrainMode::gan;
    else if (mode == "l2-only") c.train_mode = TrainMode::l2_only;
    else throw ValidationError("mode must be 'gan' or 'l2-only'");
    t.erase("mode");
    t["seed"] = detail::section_seed(t, "seed", c.seed, 0x7a1);
    doc["train"]["seed"] = t["seed"];
    c.train = training::train_config_from_json(t);
  });
  guard("eval", [&] {
    const Json& e = doc.at("eval");
    auto& s = c.eval;
    s.k_grid = e.at("k_grid").get<std::vector<int>>();
    if (s.k_grid.empty()) throw ValidationError("k_grid must not be empty");
    for (int k : s.k_grid)
      if (k < 1) throw ValidationError("k_grid entries must be >= 1");
    s.test_records = e.at("test_records");
    if (s.test_records < 0) throw ValidationError("test_records must be >= 0");
    s.domain = e.at("domain");
    eval::metric_domain_from_string(s.domain);
    s.baselines.clear();
    for (const auto& b : e.at("baselines")) s.baselines.push_back(eval::baseline_spec_from_json(b));
    s.render_count = e.at("render_count");
    s.seed = detail::section_seed(e, "seed", c.seed, 0xe7a1);
    s.test_seed = detail::section_seed(e, "test_seed", c.seed, 0x7e57);
    doc["eval"]["seed"] = s.seed;
    doc["eval"]["test_seed"] = s.test_seed;
  });
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  c.resolved = std::move(doc);
  return c;
}

inline RunConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::vector<std::string>& overrides = {},
                             std::optional<std::uint64_t> seed_override = std::nullopt) {
  Json user = Json::object();
  if (path) {
    try {
      user = Json::parse(read_file(*path));
    } catch (const Json::parse_error& e) {
      throw ValidationError(path->string() + ": " + e.what());
    }
  }
  return resolve_config(user, overrides, seed_override);
}

/// Dotted paths of every overridable key with its default, for --help.
inline std::vector<std::string> overridable_keys() {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const Json& j, const std::string& prefix) -> void {
    for (const auto& [k, v] : j.items()) {
      const std::string path = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object()) self(self, v, path);
      else out.push_back(path + " (default " + v.dump() + ")");
    }
  };
  walk(walk, default_config_json(), "");
  out.push_back("dataset.seed, train.seed, eval.seed, eval.test_seed (default: derived from seed)");
  out.push_back("dataset.flaw.min_removed, dataset.flaw.max_removed (flawed dataset when set)");
  return out;
}

}  // namespace crme::cli
