#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/grid.hpp"

namespace crme {

struct Building {
  int id = 0;
  std::vector<Cell> cells;

  friend bool operator==(const Building&, const Building&) = default;
};

/// Binary building occupancy over a width x height cell region. Every
/// occupied cell belongs to exactly one building footprint, and each
/// footprint keeps a stable integer id so that removals can be recorded.
class GeoMap {
 public:
  GeoMap() = default;

  GeoMap(int width, int height, std::vector<Building> buildings, double meters_per_cell = 1.0)
      : occupancy_(width, height, 0), buildings_(std::move(buildings)),
        meters_per_cell_(meters_per_cell) {
    if (!(meters_per_cell > 0.0)) throw ValidationError("meters_per_cell must be positive");
    std::set<int> ids;
    for (const auto& b : buildings_) {
      if (!ids.insert(b.id).second) {
        throw ValidationError("duplicate building id " + std::to_string(b.id));
      }
      if (b.cells.empty()) throw ValidationError("building " + std::to_string(b.id) + " is empty");
      for (Cell c : b.cells) {
        if (!occupancy_.contains(c)) {
          throw BoundsError("building " + std::to_string(b.id) + " leaves the grid");
        }
        if (occupancy_[c] != 0) {
          throw ValidationError("building footprints overlap at (" + std::to_string(c.x) + ", " +
                                std::to_string(c.y) + ")");
        }
        occupancy_[c] = 1;
      }
    }
  }

  /// Labels 4-connected components of a {0,1} grid as buildings, ids
  /// assigned in row-major scan order of each component's first cell.
  static GeoMap from_occupancy(const Grid<std::uint8_t>& occ, double meters_per_cell = 1.0) {
    Grid<int> label(occ.width(), occ.height(), -1);
    std::vector<Building> buildings;
    std::vector<Cell> stack;
    for (int y = 0; y < occ.height(); ++y) {
      for (int x = 0; x < occ.width(); ++x) {
        const auto v = occ(x, y);
        if (v > 1) throw ValidationError("occupancy values must be 0 or 1");
        if (v == 0 || label(x, y) >= 0) continue;
        Building b{static_cast<int>(buildings.size()), {}};
        stack.push_back({x, y});
        label(x, y) = b.id;
        while (!stack.empty()) {
          Cell c = stack.back();
          stack.pop_back();
          b.cells.push_back(c);
          const Cell nbrs[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
          for (Cell n : nbrs) {
            if (occ.contains(n) && occ[n] == 1 && label[n] < 0) {
              label[n] = b.id;
              stack.push_back(n);
            }
          }
        }
        std::sort(b.cells.begin(), b.cells.end(),
                  [](Cell a, Cell c) { return std::pair(a.y, a.x) < std::pair(c.y, c.x); });
        buildings.push_back(std::move(b));
      }
    }
    return GeoMap(occ.width(), occ.height(), std::move(buildings), meters_per_cell);
  }

  int width() const noexcept { return occupancy_.width(); }
  int height() const noexcept { return occupancy_.height(); }
  double meters_per_cell() const noexcept { return meters_per_cell_; }
  const Grid<std::uint8_t>& occupancy() const noexcept { return occupancy_; }
  const std::vector<Building>& buildings() const noexcept { return buildings_; }

  bool is_building(Cell c) const noexcept { return occupancy_[c] != 0; }

  std::vector<Cell> free_cells() const {
    std::vector<Cell> out;
    for (int y = 0; y < height(); ++y)
      for (int x = 0; x < width(); ++x)
        if (occupancy_(x, y) == 0) out.push_back({x, y});
    return out;
  }

  std::size_t building_cell_count() const noexcept {
    return static_cast<std::size_t>(std::count(occupancy_.values().begin(),
                                               occupancy_.values().end(), std::uint8_t{1}));
  }

  const Building& building(int id) const {
    for (const auto& b : buildings_)
      if (b.id == id) return b;
    throw ValidationError("unknown building id " + std::to_string(id));
  }

  /// Copy with the listed buildings turned into free space.
  GeoMap without(const std::vector<int>& ids) const {
    std::set<int> drop(ids.begin(), ids.end());
    for (int id : drop) (void)building(id);
    std::vector<Building> kept;
    for (const auto& b : buildings_)
      if (!drop.contains(b.id)) kept.push_back(b);
    return GeoMap(width(), height(), std::move(kept), meters_per_cell_);
  }

  friend bool operator==(const GeoMap&, const GeoMap&) = default;

 private:
  Grid<std::uint8_t> occupancy_;
  std::vector<Building> buildings_;
  double meters_per_cell_ = 1.0;
};

struct Transmitter {
  Cell cell;
  double power_w = 0.0;

  friend bool operator==(const Transmitter&, const Transmitter&) = default;
};

/// Transmit-power grid: P_i at each transmitter cell, zero elsewhere.
class TransmitterField {
 public:
  TransmitterField(const GeoMap& geo, std::vector<Transmitter> txs)
      : grid_(geo.width(), geo.height(), 0.0), txs_(std::move(txs)) {
    for (const auto& t : txs_) {
      if (!grid_.contains(t.cell)) throw BoundsError("transmitter outside grid");
      if (!(t.power_w > 0.0)) throw ValidationError("transmit power must be strictly positive");
      if (geo.is_building(t.cell)) throw ValidationError("transmitter placed inside a building");
      if (grid_[t.cell] != 0.0) throw ValidationError("two transmitters share a cell");
      grid_[t.cell] = t.power_w;
    }
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  const Grid<double>& grid() const noexcept { return grid_; }
  const std::vector<Transmitter>& transmitters() const noexcept { return txs_; }

 private:
  Grid<double> grid_;
  std::vector<Transmitter> txs_;
};

enum class Domain { linear_power, db, gray };

inline std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::linear_power: return "linear_power";
    case Domain::db: return "db";
    case Domain::gray: return "gray";
  }
  return "?";
}

inline Domain domain_from_string(std::string_view s) {
  if (s == "linear_power") return Domain::linear_power;
  if (s == "db") return Domain::db;
  if (s == "gray") return Domain::gray;
  throw ValidationError("unknown domain tag '" + std::string(s) + "'");
}

inline void validate_domain_values(const Grid<double>& g, Domain d) {
  for (double v : g.values()) {
    if (std::isnan(v)) throw NumericError("radio map contains NaN");
    if (d == Domain::gray && (v < 0.0 || v > 1.0)) {
      throw ValidationError("gray value " + std::to_string(v) + " outside [0,1]");
    }
    if (d == Domain::linear_power && v < 0.0) {
      throw ValidationError("negative linear power " + std::to_string(v));
    }
  }
}

/// Average received power per cell, tagged with its numeric domain.
class RadioMap {
 public:
  RadioMap() = default;
  RadioMap(Grid<double> grid, Domain domain) : grid_(std::move(grid)), domain_(domain) {
    validate_domain_values(grid_, domain_);
  }

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  Domain domain() const noexcept { return domain_; }
  const Grid<double>& grid() const noexcept { return grid_; }
  double operator[](Cell c) const noexcept { return grid_[c]; }

  void require(Domain d, const char* op) const {
    if (domain_ != d) {
      throw DomainError(std::string(op) + " expects a " + std::string(to_string(d)) +
                        " map, got " + std::string(to_string(domain_)));
    }
  }

  friend bool operator==(const RadioMap&, const RadioMap&) = default;

 private:
  Grid<double> grid_;
  Domain domain_ = Domain::linear_power;
};

/// Sparse observations of a radio map: source values at sample cells, zero
/// everywhere else.
class RssField {
 public:
  RssField() = default;

  static RssField sample(const RadioMap& source, std::vector<Cell> locations) {
    std::sort(locations.begin(), locations.end());
    locations.erase(std::unique(locations.begin(), locations.end()), locations.end());
    Grid<double> g(source.width(), source.height(), 0.0);
    for (Cell c : locations) {
      if (!g.contains(c)) {
        throw BoundsError("sample location (" + std::to_string(c.x) + ", " +
                          std::to_string(c.y) + ") outside grid");
      }
      g[c] = source[c];
    }
    RssField f;
    f.grid_ = std::move(g);
    f.domain_ = source.domain();
    f.locations_ = std::move(locations);
    return f;
  }

  const Grid<double>& grid() const noexcept { return grid_; }
  Domain domain() const noexcept { return domain_; }
  const std::vector<Cell>& sample_locations() const noexcept { return locations_; }

 private:
  Grid<double> grid_;
  Domain domain_ = Domain::gray;
  std::vector<Cell> locations_;
};

/// Per-cell average noise power in watts.
class NoiseMap {
 public:
  explicit NoiseMap(Grid<double> grid) : grid_(std::move(grid)) {
    for (double v : grid_.values())
      if (!(v >= 0.0)) throw ValidationError("noise power must be nonnegative");
  }

  static NoiseMap constant(int width, int height, double power_w) {
    return NoiseMap(Grid<double>(width, height, power_w));
  }

  const Grid<double>& grid() const noexcept { return grid_; }

 private:
  Grid<double> grid_;
};

}  // namespace crme
