#pragma once

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include <json.hpp>

#include "crme/core/error.hpp"
#include "crme/core/types.hpp"

namespace crme {

using Json = nlohmann::ordered_json;

/// FNV-1a; stable across platforms, used for seeds and run-directory names.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Write-temp-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

inline Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  c = ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(c);
}

inline std::uint32_t crc32_of_file(const std::filesystem::path& path) {
  return crc32_of(read_file(path));
}

// Metadata sidecars.

inline Json cells_to_json(const std::vector<Cell>& cells) {
  Json a = Json::array();
  for (Cell c : cells) a.push_back({c.x, c.y});
  return a;
}

inline std::vector<Cell> cells_from_json(const Json& a) {
  std::vector<Cell> out;
  out.reserve(a.size());
  for (const auto& p : a) out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  return out;
}

inline Json geo_sidecar(const GeoMap& geo) {
  Json b = Json::array();
  for (const auto& bld : geo.buildings()) b.push_back({{"id", bld.id}, {"cells", cells_to_json(bld.cells)}});
  return {{"width", geo.width()},
          {"height", geo.height()},
          {"meters_per_cell", geo.meters_per_cell()},
          {"buildings", std::move(b)}};
}

inline GeoMap geo_from_sidecar(const Json& j) {
  std::vector<Building> blds;
  for (const auto& b : j.at("buildings"))
    blds.push_back({b.at("id").get<int>(), cells_from_json(b.at("cells"))});
  return GeoMap(j.at("width").get<int>(), j.at("height").get<int>(), std::move(blds),
                j.at("meters_per_cell").get<double>());
}

inline Json radio_map_sidecar(const RadioMap& map, double meters_per_cell) {
  return {{"domain", std::string(to_string(map.domain()))},
          {"width", map.width()},
          {"height", map.height()},
          {"meters_per_cell", meters_per_cell}};
}

}  // namespace crme
