#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crme/core/files.hpp"
#include "crme/core/png_io.hpp"
#include "crme/core/seed.hpp"
#include "crme/core/types.hpp"
#include "crme/core/units.hpp"
#include "crme/dataset/codec.hpp"
#include "crme/dataset/scene.hpp"
#include "crme/propagation/model.hpp"

namespace crme::dataset {

struct SampleMeta {
  int num_samples = 0;
  std::vector<int> removed_building_ids;
  // Footprint cells of the removed buildings, so the ground-truth map can be
  // recovered from a flawed record.
  std::vector<Cell> removed_cells;
  // Persisted because a zero gray value is ambiguous between "no sample" and
  // a floor-level sample.
  std::vector<Cell> sample_locations;
  std::uint64_t seed = 0;
  std::string source = "synthetic";

  bool flawed() const noexcept { return !removed_building_ids.empty(); }
  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// One training pair: the 2-channel input [RSS, geo map] and the gray label.
struct SampleRecord {
  std::string id;
  Grid<double> rss;  // channel 0
  Grid<double> map;  // channel 1, {0, 1}
  RadioMap label;    // gray
  SampleMeta meta;

  int width() const noexcept { return label.width(); }
  int height() const noexcept { return label.height(); }

  /// Occupancy of the real world: the input map plus any removed buildings.
  Grid<std::uint8_t> truth_occupancy() const {
    Grid<std::uint8_t> occ = map.map([](double v) { return static_cast<std::uint8_t>(v != 0.0); });
    for (Cell c : meta.removed_cells) occ[c] = 1;
    return occ;
  }

  std::vector<Cell> truth_free_cells() const {
    auto occ = truth_occupancy();
    std::vector<Cell> out;
    for (int y = 0; y < occ.height(); ++y)
      for (int x = 0; x < occ.width(); ++x)
        if (occ(x, y) == 0) out.push_back({x, y});
    return out;
  }

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline Grid<double> occupancy_image(const GeoMap& geo) {
  return geo.occupancy().map([](std::uint8_t v) { return static_cast<double>(v); });
}

/// Builds the RSS channel by sampling the label at `locations`.
inline Grid<double> rss_channel(const RadioMap& label, const std::vector<Cell>& locations) {
  return RssField::sample(label, locations).grid();
}

/// Same record with its RSS channel re-drawn: K cells from the ground-truth
/// free cells, values taken from the label.
inline SampleRecord resample(const SampleRecord& rec, int k, std::uint64_t seed) {
  Rng rng(seed);
  SampleRecord out = rec;
  out.meta.sample_locations = draw_cells(rec.truth_free_cells(), k, rng);
  out.meta.num_samples = k;
  out.rss = rss_channel(rec.label, out.meta.sample_locations);
  return out;
}

struct FlawSpec {
  RemovalCount count;
  friend bool operator==(const FlawSpec&, const FlawSpec&) = default;
};

/// simulate -> dB -> gray label -> users on ground-truth free cells -> RSS
/// from the label -> [RSS, map] input, where the map channel is the flawed
/// map when a flaw spec is given.
inline SampleRecord make_sample(const GeoMap& geo, const TransmitterField& tx, const NoiseMap& noise,
                                const propagation::PropagationParams& params,
                                const UserCountDistribution& dist, const GrayCodec& codec,
                                const std::optional<FlawSpec>& flaw, Rng& rng) {
  const RadioMap linear = propagation::simulate_radio_map(tx, geo, noise, params);
  SampleRecord rec;
  rec.label = to_gray(linear_to_db(linear, codec.floor_dbm), codec);
  rec.meta.sample_locations = draw_user_locations(geo, dist, rng);
  rec.meta.num_samples = static_cast<int>(rec.meta.sample_locations.size());
  rec.rss = rss_channel(rec.label, rec.meta.sample_locations);
  if (flaw) {
    // Sparse cities can have fewer buildings than the requested removals.
    const int total = static_cast<int>(geo.buildings().size());
    const RemovalCount count{std::min(flaw->count.low, total), std::min(flaw->count.high, total)};
    auto [flawed, removed] = make_flawed_map(geo, count, rng);
    for (int id : removed)
      for (Cell c : geo.building(id).cells) rec.meta.removed_cells.push_back(c);
    std::sort(rec.meta.removed_cells.begin(), rec.meta.removed_cells.end());
    rec.meta.removed_building_ids = std::move(removed);
    rec.map = occupancy_image(flawed);
  } else {
    rec.map = occupancy_image(geo);
  }
  return rec;
}

// On-disk record: input_rss.png, input_map.png, label.png, meta.json.

inline constexpr const char* kRecordFiles[] = {"input_rss.png", "input_map.png", "label.png",
                                               "meta.json"};

inline Json meta_to_json(const SampleRecord& rec) {
  return {{"id", rec.id},
          {"width", rec.width()},
          {"height", rec.height()},
          {"num_samples", rec.meta.num_samples},
          {"removed_building_ids", rec.meta.removed_building_ids},
          {"removed_cells", cells_to_json(rec.meta.removed_cells)},
          {"sample_locations", cells_to_json(rec.meta.sample_locations)},
          {"seed", rec.meta.seed},
          {"source", rec.meta.source},
          {"label_domain", "gray"}};
}

inline void write_record(const SampleRecord& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_png8(to_pixels(rec.rss), dir / "input_rss.png");
  write_png8(to_pixels(rec.map), dir / "input_map.png");
  write_gray_png(rec.label, dir / "label.png");
  write_json(dir / "meta.json", meta_to_json(rec));
}

inline SampleRecord read_record(const std::filesystem::path& dir) {
  const Json meta = read_json(dir / "meta.json");
  SampleRecord rec;
  try {
    rec.id = meta.at("id").get<std::string>();
    rec.meta.num_samples = meta.at("num_samples").get<int>();
    rec.meta.removed_building_ids = meta.at("removed_building_ids").get<std::vector<int>>();
    rec.meta.removed_cells = cells_from_json(meta.at("removed_cells"));
    rec.meta.sample_locations = cells_from_json(meta.at("sample_locations"));
    rec.meta.seed = meta.at("seed").get<std::uint64_t>();
    rec.meta.source = meta.at("source").get<std::string>();
  } catch (const Json::exception& e) {
    throw ValidationError((dir / "meta.json").string() + ": " + e.what());
  }
  rec.rss = from_pixels(read_png8(dir / "input_rss.png"));
  rec.map = from_pixels(read_png8(dir / "input_map.png"));
  rec.label = read_gray_png(dir / "label.png");
  if (!rec.rss.same_shape(rec.label.grid()) || !rec.map.same_shape(rec.label.grid()) ||
      rec.label.width() != meta.at("width").get<int>() ||
      rec.label.height() != meta.at("height").get<int>()) {
    throw ValidationError(dir.string() + ": channel shapes disagree");
  }
  for (double v : rec.map.values())
    if (v != 0.0 && v != 1.0) throw ValidationError(dir.string() + ": map channel not binary");
  return rec;
}

}  // namespace crme::dataset
