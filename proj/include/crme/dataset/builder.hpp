#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "crme/core/files.hpp"
#include "crme/core/seed.hpp"
#include "crme/dataset/codec.hpp"
#include "crme/dataset/record.hpp"
#include "crme/dataset/scene.hpp"
#include "crme/propagation/model.hpp"

namespace crme::dataset {

inline constexpr int kManifestVersion = 1;

struct DatasetConfig {
  int num_records = 10;
  std::uint64_t seed = 1;
  CityConfig city;
  TransmitterConfig transmitters;
  propagation::PropagationParams propagation;
  GrayCodec codec;
  UserCountDistribution users{12, 80};
  double noise_dbm = -120.0;
  std::optional<FlawSpec> flaw;
  std::string split = "train";

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

inline std::string record_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "r%06d", index);
  return buf;
}

/// Record `index` of a synthetic dataset, a pure function of (config, index).
inline SampleRecord synthesize_record(const DatasetConfig& cfg, int index) {
  const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(index)});
  Rng rng(seed);
  const GeoMap geo = generate_city(cfg.city, rng);
  const TransmitterField tx = place_transmitters(geo, cfg.transmitters, rng);
  const NoiseMap noise = NoiseMap::constant(geo.width(), geo.height(), dbm_to_watts(cfg.noise_dbm));
  auto params = cfg.propagation;
  params.rng_seed = derive_seed(seed, {0x5ad0});
  SampleRecord rec = make_sample(geo, tx, noise, params, cfg.users, cfg.codec, cfg.flaw, rng);
  rec.id = record_id(index);
  rec.meta.seed = seed;
  return rec;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must be pure
/// per index; results are placed by index so scheduling cannot change them.
template <class Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  workers = std::clamp(workers, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline Json to_json(const DatasetConfig& c) {
  Json j = {{"num_records", c.num_records},
            {"seed", c.seed},
            {"split", c.split},
            {"noise_dbm", c.noise_dbm},
            {"users", {{"kind", "uniform-integer"}, {"low", c.users.low}, {"high", c.users.high}}},
            {"city", to_json(c.city)},
            {"transmitters", to_json(c.transmitters)},
            {"propagation", propagation::to_json(c.propagation)},
            {"codec", to_json(c.codec)}};
  if (c.flaw) j["flaw"] = {{"min_removed", c.flaw->count.low}, {"max_removed", c.flaw->count.high}};
  else j["flaw"] = nullptr;
  return j;
}

/// Writes `num_records` records plus manifest.json into out_dir and returns
/// the manifest. Rebuilding with the same config reproduces every byte.
inline Json build_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir,
                          int workers = 1) {
  cfg.codec.validate();
  cfg.users.validate();
  cfg.propagation.validate();
  if (cfg.num_records < 0) throw ValidationError("num_records must be >= 0");
  std::filesystem::create_directories(out_dir / "records");

  std::vector<Json> entries(static_cast<std::size_t>(cfg.num_records));
  parallel_for(cfg.num_records, workers, [&](int i) {
    const SampleRecord rec = synthesize_record(cfg, i);
    const auto dir = out_dir / "records" / rec.id;
    write_record(rec, dir);
    Json files = Json::object();
    for (const char* f : kRecordFiles) files[f] = crc32_of_file(dir / f);
    entries[static_cast<std::size_t>(i)] = {{"id", rec.id},
                                            {"seed", rec.meta.seed},
                                            {"num_samples", rec.meta.num_samples},
                                            {"removed_building_ids", rec.meta.removed_building_ids},
                                            {"crc32", std::move(files)}};
  });

  Json manifest = {{"version", kManifestVersion},
                   {"kind", cfg.flaw ? "flawed" : "standard"},
                   {"source", "synthetic"},
                   {"count", cfg.num_records},
                   {"seed", cfg.seed},
                   {"split", cfg.split},
                   {"codec", to_json(cfg.codec)},
                   {"propagation", propagation::to_json(cfg.propagation)},
                   {"config", to_json(cfg)},
                   {"records", entries}};
  write_json(out_dir / "manifest.json", manifest);
  return manifest;
}

/// Writes an arbitrary record set (e.g. ingested data) with a manifest.
inline Json write_dataset(const std::vector<SampleRecord>& records, const std::filesystem::path& out_dir,
                          Json extra = Json::object()) {
  std::filesystem::create_directories(out_dir / "records");
  Json entries = Json::array();
  for (const auto& rec : records) {
    const auto dir = out_dir / "records" / rec.id;
    write_record(rec, dir);
    Json files = Json::object();
    for (const char* f : kRecordFiles) files[f] = crc32_of_file(dir / f);
    entries.push_back({{"id", rec.id},
                       {"seed", rec.meta.seed},
                       {"num_samples", rec.meta.num_samples},
                       {"removed_building_ids", rec.meta.removed_building_ids},
                       {"crc32", std::move(files)}});
  }
  bool flawed = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.meta.flawed(); });
  Json manifest = {{"version", kManifestVersion},
                   {"kind", flawed ? "flawed" : "standard"},
                   {"source", records.empty() ? "synthetic" : records.front().meta.source},
                   {"count", records.size()}};
  for (auto& [k, v] : extra.items()) manifest[k] = v;
  manifest["records"] = std::move(entries);
  write_json(out_dir / "manifest.json", manifest);
  return manifest;
}

/// Validated view of a dataset directory. Records are read lazily, in
/// manifest order or in a seeded permutation of it.
class DatasetReader {
 public:
  explicit DatasetReader(std::filesystem::path dir, bool verify_checksums = true)
      : dir_(std::move(dir)), verify_(verify_checksums) {
    manifest_ = read_json(dir_ / "manifest.json");
    if (manifest_.value("version", -1) != kManifestVersion) {
      throw ValidationError(dir_.string() + ": unsupported manifest version");
    }
    const auto& recs = manifest_.at("records");
    const auto count = manifest_.at("count").get<std::size_t>();
    if (recs.size() != count) throw ValidationError(dir_.string() + ": manifest count disagrees with record list");
    std::size_t on_disk = 0;
    if (std::filesystem::is_directory(dir_ / "records")) {
      for (const auto& e : std::filesystem::directory_iterator(dir_ / "records"))
        if (e.is_directory()) ++on_disk;
    }
    if (on_disk != count) {
      throw ValidationError(dir_.string() + ": manifest lists " + std::to_string(count) +
                            " records but " + std::to_string(on_disk) + " are on disk");
    }
    for (const auto& r : recs) ids_.push_back(r.at("id").get<std::string>());
    order_.resize(ids_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  }

  const Json& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return ids_.size(); }

  void shuffle(std::uint64_t seed) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    Rng rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }

  /// i-th record in the current order.
  SampleRecord read(std::size_t i) const {
    const std::size_t idx = order_.at(i);
    const auto dir = dir_ / "records" / ids_[idx];
    if (verify_) {
      const auto& sums = manifest_.at("records")[idx].at("crc32");
      for (const char* f : kRecordFiles) {
        if (!std::filesystem::exists(dir / f)) throw IoError(dir.string() + ": missing " + f);
        if (crc32_of_file(dir / f) != sums.at(f).get<std::uint32_t>()) {
          throw ValidationError((dir / f).string() + ": checksum mismatch");
        }
      }
    }
    return read_record(dir);
  }

  std::vector<SampleRecord> read_all() const {
    std::vector<SampleRecord> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(read(i));
    return out;
  }

 private:
  std::filesystem::path dir_;
  bool verify_ = true;
  Json manifest_;
  std::vector<std::string> ids_;
  std::vector<std::size_t> order_;
};

inline std::vector<SampleRecord> load_dataset(const std::filesystem::path& dir,
                                              std::optional<std::uint64_t> shuffle_seed = std::nullopt) {
  DatasetReader reader(dir);
  if (shuffle_seed) reader.shuffle(*shuffle_seed);
  return reader.read_all();
}

}  // namespace crme::dataset
