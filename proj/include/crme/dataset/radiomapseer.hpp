#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/png_io.hpp"
#include "crme/core/seed.hpp"
#include "crme/dataset/record.hpp"
#include "crme/dataset/scene.hpp"

namespace crme::dataset {

/// Read-only adapter for the published RadioMapSeer layout:
///
///   <root>/png/buildings_complete/<map>.png     building map, 255 = building
///   <root>/gain/<simulation>/<map>_<tx>.png      gray pathloss/gain image
///
/// Each gain image becomes one record whose label is pixel/255 (already gray,
/// not re-floored) and whose RSS channel samples K free cells of the label.
/// The transmitter-location images under png/antennas are never read.
struct RadioMapSeerOptions {
  std::string simulation = "DPM";
  int max_records = -1;  // -1 = all
};

inline std::vector<SampleRecord> ingest_radiomapseer(const std::filesystem::path& root,
                                                     const UserCountDistribution& dist,
                                                     const GrayCodec& /*codec*/, Rng& rng,
                                                     const RadioMapSeerOptions& opts = {}) {
  const auto buildings_dir = root / "png" / "buildings_complete";
  const auto gain_dir = root / "gain" / opts.simulation;
  if (!std::filesystem::is_directory(buildings_dir) || !std::filesystem::is_directory(gain_dir)) {
    throw IoError(root.string() + ": expected png/buildings_complete/ and gain/" + opts.simulation + "/");
  }

  std::vector<std::filesystem::path> gains;
  for (const auto& e : std::filesystem::directory_iterator(gain_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") gains.push_back(e.path());
  std::sort(gains.begin(), gains.end());

  std::map<std::string, Grid<std::uint8_t>> building_cache;
  std::vector<SampleRecord> out;
  for (const auto& gain_path : gains) {
    if (opts.max_records >= 0 && static_cast<int>(out.size()) >= opts.max_records) break;
    const std::string stem = gain_path.stem().string();
    const auto us = stem.rfind('_');
    if (us == std::string::npos || us == 0) {
      throw IoError(gain_path.string() + ": gain file name must be <map>_<tx>.png");
    }
    const std::string map_id = stem.substr(0, us);

    auto it = building_cache.find(map_id);
    if (it == building_cache.end()) {
      const auto bpath = buildings_dir / (map_id + ".png");
      if (!std::filesystem::exists(bpath)) throw IoError(bpath.string() + ": missing building map");
      Grid<std::uint8_t> px = read_png8(bpath);
      it = building_cache.emplace(map_id, px.map([](std::uint8_t p) {
                                    return static_cast<std::uint8_t>(p > 127 ? 1 : 0);
                                  })).first;
    }
    const Grid<std::uint8_t>& occ = it->second;
    const Grid<std::uint8_t> gain_px = read_png8(gain_path);
    if (!gain_px.same_shape(occ)) {
      throw IoError(gain_path.string() + ": size differs from its building map");
    }

    SampleRecord rec;
    rec.id = "rms_" + stem;
    rec.label = RadioMap(from_pixels(gain_px), Domain::gray);
    rec.map = occ.map([](std::uint8_t v) { return static_cast<double>(v); });
    std::vector<Cell> free;
    for (int y = 0; y < occ.height(); ++y)
      for (int x = 0; x < occ.width(); ++x)
        if (occ(x, y) == 0) free.push_back({x, y});
    const int k = dist.draw(rng);
    rec.meta.sample_locations = draw_cells(std::move(free), k, rng);
    rec.meta.num_samples = k;
    rec.meta.source = "radiomapseer";
    rec.rss = rss_channel(rec.label, rec.meta.sample_locations);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace crme::dataset
