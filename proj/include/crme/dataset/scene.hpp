#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/seed.hpp"
#include "crme/core/types.hpp"
#include "crme/core/units.hpp"

namespace crme::dataset {

struct UserCountDistribution {
  int low = 0;
  int high = 0;

  void validate() const {
    if (low < 0 || low > high) {
      throw ValidationError("user count distribution needs 0 <= low <= high, got [" +
                            std::to_string(low) + ", " + std::to_string(high) + "]");
    }
  }
  int draw(Rng& rng) const {
    validate();
    return std::uniform_int_distribution<int>(low, high)(rng);
  }
  friend bool operator==(const UserCountDistribution&, const UserCountDistribution&) = default;
};

/// K distinct cells drawn uniformly without replacement.
inline std::vector<Cell> draw_cells(std::vector<Cell> pool, int k, Rng& rng) {
  if (k < 0 || static_cast<std::size_t>(k) > pool.size()) {
    throw ValidationError("cannot draw " + std::to_string(k) + " distinct cells from " +
                          std::to_string(pool.size()) + " free cells");
  }
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// User positions on free cells of the (ground-truth) map.
inline std::vector<Cell> draw_user_locations(const GeoMap& geo, const UserCountDistribution& dist,
                                             Rng& rng) {
  auto free = geo.free_cells();
  if (free.empty()) throw ValidationError("map has no free cell for users");
  const int k = dist.draw(rng);
  return draw_cells(std::move(free), k, rng);
}

struct RemovalCount {
  int low = 1;
  int high = 3;
  friend bool operator==(const RemovalCount&, const RemovalCount&) = default;
};

/// Copy of `geo` with a random subset of buildings erased, plus the erased
/// ids in ascending order. The input map is untouched.
inline std::pair<GeoMap, std::vector<int>> make_flawed_map(const GeoMap& geo, RemovalCount count,
                                                           Rng& rng) {
  if (count.low < 0 || count.low > count.high) throw ValidationError("invalid removal range");
  const int n = std::uniform_int_distribution<int>(count.low, count.high)(rng);
  const int total = static_cast<int>(geo.buildings().size());
  if (n > total) {
    throw ValidationError("cannot remove " + std::to_string(n) + " buildings from a map with " +
                          std::to_string(total));
  }
  std::vector<int> ids;
  for (const auto& b : geo.buildings()) ids.push_back(b.id);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), ids.size() - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[pick(rng)]);
  }
  ids.resize(static_cast<std::size_t>(n));
  std::sort(ids.begin(), ids.end());
  return {geo.without(ids), ids};
}

inline std::pair<GeoMap, std::vector<int>> make_flawed_map(const GeoMap& geo, int n_remove, Rng& rng) {
  return make_flawed_map(geo, RemovalCount{n_remove, n_remove}, rng);
}

/// Random rectangular-block city: axis-aligned buildings that never touch
/// each other (at least `min_gap` free cells between footprints).
struct CityConfig {
  int width = 64;
  int height = 64;
  double meters_per_cell = 1.0;
  int min_buildings = 4;
  int max_buildings = 9;
  int min_side = 4;
  int max_side = 14;
  int min_gap = 2;
  friend bool operator==(const CityConfig&, const CityConfig&) = default;
};

inline GeoMap generate_city(const CityConfig& cfg, Rng& rng) {
  if (cfg.min_side < 1 || cfg.max_side < cfg.min_side || cfg.min_buildings < 0 ||
      cfg.max_buildings < cfg.min_buildings || cfg.min_gap < 1) {
    throw ValidationError("invalid city config");
  }
  const int target = std::uniform_int_distribution<int>(cfg.min_buildings, cfg.max_buildings)(rng);
  Grid<std::uint8_t> blocked(cfg.width, cfg.height, 0);
  std::vector<Building> out;
  std::uniform_int_distribution<int> side(cfg.min_side, std::min(cfg.max_side, std::min(cfg.width, cfg.height) - 2));
  for (int attempt = 0; attempt < 200 * std::max(target, 1) && static_cast<int>(out.size()) < target;
       ++attempt) {
    const int w = side(rng);
    const int h = side(rng);
    const int x0 = std::uniform_int_distribution<int>(1, cfg.width - w - 1)(rng);
    const int y0 = std::uniform_int_distribution<int>(1, cfg.height - h - 1)(rng);
    bool clash = false;
    for (int y = y0; y < y0 + h && !clash; ++y)
      for (int x = x0; x < x0 + w && !clash; ++x) clash = blocked(x, y) != 0;
    if (clash) continue;
    Building b{static_cast<int>(out.size()), {}};
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) b.cells.push_back({x, y});
    for (int y = std::max(0, y0 - cfg.min_gap); y < std::min(cfg.height, y0 + h + cfg.min_gap); ++y)
      for (int x = std::max(0, x0 - cfg.min_gap); x < std::min(cfg.width, x0 + w + cfg.min_gap); ++x)
        blocked(x, y) = 1;
    out.push_back(std::move(b));
  }
  return GeoMap(cfg.width, cfg.height, std::move(out), cfg.meters_per_cell);
}

struct TransmitterConfig {
  int min_count = 1;
  int max_count = 2;
  double power_dbm = 20.0;
  friend bool operator==(const TransmitterConfig&, const TransmitterConfig&) = default;
};

inline TransmitterField place_transmitters(const GeoMap& geo, const TransmitterConfig& cfg, Rng& rng) {
  if (cfg.min_count < 0 || cfg.max_count < cfg.min_count) {
    throw ValidationError("invalid transmitter count range");
  }
  const int n = std::uniform_int_distribution<int>(cfg.min_count, cfg.max_count)(rng);
  std::vector<Transmitter> txs;
  for (Cell c : draw_cells(geo.free_cells(), n, rng)) txs.push_back({c, dbm_to_watts(cfg.power_dbm)});
  return TransmitterField(geo, std::move(txs));
}

inline Json to_json(const CityConfig& c) {
  return {{"width", c.width},           {"height", c.height},
          {"meters_per_cell", c.meters_per_cell}, {"min_buildings", c.min_buildings},
          {"max_buildings", c.max_buildings},     {"min_side", c.min_side},
          {"max_side", c.max_side},               {"min_gap", c.min_gap}};
}

inline Json to_json(const TransmitterConfig& t) {
  return {{"min_count", t.min_count}, {"max_count", t.max_count}, {"power_dbm", t.power_dbm}};
}

}  // namespace crme::dataset
