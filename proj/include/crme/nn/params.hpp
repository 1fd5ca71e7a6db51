#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/seed.hpp"
#include "crme/nn/tensor.hpp"

namespace crme::nn {

template <class T>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> values;

  friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

/// Flat, ordered collection of named parameter arrays for one network.
template <class T>
class ModelParams {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    arrays_.push_back({std::move(name), std::move(shape), AlignedVector<T>(n, T(0))});
    return arrays_.size() - 1;
  }

  std::size_t count() const noexcept { return arrays_.size(); }
  ParamArray<T>& operator[](std::size_t i) { return arrays_[i]; }
  const ParamArray<T>& operator[](std::size_t i) const { return arrays_[i]; }
  std::span<T> values(std::size_t i) { return arrays_[i].values; }
  std::span<const T> values(std::size_t i) const { return arrays_[i].values; }

  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.values.size();
    return n;
  }

  /// Same names and shapes, values zeroed.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (auto& a : z.arrays_) std::fill(a.values.begin(), a.values.end(), T(0));
    return z;
  }

  void set_zero() {
    for (auto& a : arrays_) std::fill(a.values.begin(), a.values.end(), T(0));
  }

  bool same_layout(const ModelParams& o) const {
    if (arrays_.size() != o.arrays_.size()) return false;
    for (std::size_t i = 0; i < arrays_.size(); ++i)
      if (arrays_[i].name != o.arrays_[i].name || arrays_[i].shape != o.arrays_[i].shape) return false;
    return true;
  }

  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    for (const auto& a : arrays_) {
      auto i = out.add(a.name, a.shape);
      for (std::size_t k = 0; k < a.values.size(); ++k) out[i].values[k] = static_cast<U>(a.values[k]);
    }
    return out;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<ParamArray<T>> arrays_;
};

/// Fan-in scaled normal weights (std = sqrt(2 / fan_in)) for arrays named
/// "*.weight"; zero for everything else. fan_in is the product of all but
/// the leading dimension.
template <class T>
void init_fan_in(ModelParams<T>& params, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& a : params) {
    const bool is_weight = a.name.size() >= 7 && a.name.compare(a.name.size() - 7, 7, ".weight") == 0;
    if (!is_weight) {
      std::fill(a.values.begin(), a.values.end(), T(0));
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < a.shape.size(); ++d) fan_in *= static_cast<std::size_t>(a.shape[d]);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : a.values) v = static_cast<T>(scale * normal(rng));
  }
}

// Checkpoint container:
//   8 bytes  magic "CRMEPRM1"
//   8 bytes  little-endian header length L
//   L bytes  JSON header {version, dtype, spec, arrays:[{name, shape, offset, count}]}
//   raw little-endian array data, arrays back to back

inline constexpr char kParamMagic[8] = {'C', 'R', 'M', 'E', 'P', 'R', 'M', '1'};
inline constexpr int kParamVersion = 1;

template <class T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "float32";
  else if constexpr (std::is_same_v<T, double>) return "float64";
  else static_assert(sizeof(T) == 0, "unsupported parameter scalar");
}

template <class T>
std::string serialize_params(const ModelParams<T>& params, const Json& spec) {
  Json arrays = Json::array();
  std::size_t offset = 0;
  for (const auto& a : params) {
    arrays.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.values.size()}});
    offset += a.values.size();
  }
  const std::string header =
      Json{{"version", kParamVersion}, {"dtype", dtype_name<T>()}, {"spec", spec}, {"arrays", arrays}}.dump();
  std::string out(kParamMagic, 8);
  std::uint64_t len = header.size();
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((len >> (8 * b)) & 0xff));
  out += header;
  for (const auto& a : params) {
    out.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(T));
  }
  return out;
}

template <class T>
void save_params(const std::filesystem::path& path, const ModelParams<T>& params, const Json& spec) {
  write_file_atomic(path, serialize_params(params, spec));
}

struct CheckpointHeader {
  Json header;
  std::size_t data_offset = 0;
};

inline CheckpointHeader parse_checkpoint_header(const std::string& bytes, const std::string& where) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kParamMagic, 8) != 0) {
    throw ValidationError(where + ": not a parameter checkpoint");
  }
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + b])) << (8 * b);
  if (16 + len > bytes.size()) throw ValidationError(where + ": truncated header");
  CheckpointHeader h;
  try {
    h.header = Json::parse(bytes.substr(16, len));
  } catch (const Json::parse_error& e) {
    throw ValidationError(where + ": bad header: " + e.what());
  }
  if (h.header.value("version", -1) != kParamVersion) throw ValidationError(where + ": unsupported checkpoint version");
  h.data_offset = 16 + len;
  return h;
}

/// Loads values into `layout` (built from the expected spec). Names, shapes
/// and dtype must match exactly; mismatches are reported by array name.
template <class T>
void load_params_into(const std::filesystem::path& path, ModelParams<T>& layout, Json* spec_out = nullptr) {
  const std::string bytes = read_file(path);
  const auto h = parse_checkpoint_header(bytes, path.string());
  if (h.header.at("dtype").get<std::string>() != dtype_name<T>()) {
    throw ValidationError(path.string() + ": dtype " + h.header.at("dtype").get<std::string>() +
                          " does not match " + dtype_name<T>());
  }
  const auto& arrays = h.header.at("arrays");
  if (arrays.size() != layout.count()) {
    throw ValidationError(path.string() + ": checkpoint has " + std::to_string(arrays.size()) +
                          " arrays, spec expects " + std::to_string(layout.count()));
  }
  for (std::size_t i = 0; i < layout.count(); ++i) {
    const auto& a = arrays[i];
    auto& dst = layout[i];
    const auto name = a.at("name").get<std::string>();
    const auto shape = a.at("shape").get<std::vector<int>>();
    if (name != dst.name || shape != dst.shape) {
      throw ValidationError(path.string() + ": array " + std::to_string(i) + " is '" + name +
                            "' with a different shape than expected '" + dst.name + "'");
    }
    const auto offset = a.at("offset").get<std::size_t>();
    const auto count = a.at("count").get<std::size_t>();
    if (count != dst.values.size() || h.data_offset + (offset + count) * sizeof(T) > bytes.size()) {
      throw ValidationError(path.string() + ": array '" + name + "' truncated or miscounted");
    }
    std::memcpy(dst.values.data(), bytes.data() + h.data_offset + offset * sizeof(T), count * sizeof(T));
  }
  if (spec_out) *spec_out = h.header.at("spec");
}

}  // namespace crme::nn
