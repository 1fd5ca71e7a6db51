#pragma once

#include <algorithm>
#include <cmath>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/types.hpp"

namespace crme::dataset {

/// dBm <-> gray-level encoding: clamp to [floor, ceiling], rescale to the
/// unit interval, then round to one of `levels` evenly spaced values.
struct GrayCodec {
  double floor_dbm = -150.0;
  double ceiling_dbm = -40.0;
  int levels = 256;

  void validate() const {
    if (!(floor_dbm < ceiling_dbm)) throw ValidationError("codec: floor_dbm must be < ceiling_dbm");
    if (levels < 2) throw ValidationError("codec: levels must be >= 2");
  }

  double encode(double dbm) const {
    const double t = (std::clamp(dbm, floor_dbm, ceiling_dbm) - floor_dbm) / (ceiling_dbm - floor_dbm);
    const double steps = levels - 1;
    return std::round(t * steps) / steps;
  }

  double decode(double gray) const { return floor_dbm + gray * (ceiling_dbm - floor_dbm); }

  friend bool operator==(const GrayCodec&, const GrayCodec&) = default;
};

inline RadioMap to_gray(const RadioMap& db_map, const GrayCodec& codec) {
  codec.validate();
  db_map.require(Domain::db, "to_gray");
  return RadioMap(db_map.grid().map([&](double v) { return codec.encode(v); }), Domain::gray);
}

inline RadioMap from_gray(const RadioMap& gray, const GrayCodec& codec) {
  codec.validate();
  gray.require(Domain::gray, "from_gray");
  return RadioMap(gray.grid().map([&](double v) { return codec.decode(v); }), Domain::db);
}

inline Json to_json(const GrayCodec& c) {
  return {{"floor_dbm", c.floor_dbm}, {"ceiling_dbm", c.ceiling_dbm}, {"levels", c.levels}};
}

inline GrayCodec gray_codec_from_json(const Json& j) {
  GrayCodec c;
  for (const auto& [key, v] : j.items()) {
    if (key == "floor_dbm") c.floor_dbm = v.get<double>();
    else if (key == "ceiling_dbm") c.ceiling_dbm = v.get<double>();
    else if (key == "levels") c.levels = v.get<int>();
    else throw ValidationError("codec: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

}  // namespace crme::dataset
