#pragma once

#include <algorithm>
#include <cmath>

#include "crme/core/types.hpp"

namespace crme {

inline constexpr double kDefaultFloorDbm = -150.0;

inline double watts_to_dbm(double watts, double floor_dbm = kDefaultFloorDbm) {
  if (!(watts > 0.0)) return floor_dbm;
  return std::max(10.0 * std::log10(watts / 1e-3), floor_dbm);
}

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

/// 10 log10(P / 1 mW) per cell. Values at or below the floor (zero
/// included) clamp to floor_dbm.
inline RadioMap linear_to_db(const RadioMap& map, double floor_dbm = kDefaultFloorDbm) {
  map.require(Domain::linear_power, "linear_to_db");
  return RadioMap(map.grid().map([&](double w) { return watts_to_dbm(w, floor_dbm); }),
                  Domain::db);
}

inline RadioMap db_to_linear(const RadioMap& map) {
  map.require(Domain::db, "db_to_linear");
  return RadioMap(map.grid().map([](double d) { return dbm_to_watts(d); }), Domain::linear_power);
}

}  // namespace crme
