#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "crme/core/error.hpp"
#include "crme/core/files.hpp"
#include "crme/core/seed.hpp"
#include "crme/core/types.hpp"
#include "crme/core/units.hpp"
#include "crme/propagation/line_traversal.hpp"

namespace crme::propagation {

/// Dominant-path model constants: log-distance loss plus a fixed
/// penetration loss for every building cell on the direct path, optionally
/// multiplied by correlated log-normal shadowing.
struct PropagationParams {
  double pathloss_exponent = 2.5;
  double reference_loss_db = 40.0;  // at 1 m
  double wall_loss_db = 10.0;       // per building cell crossed
  double shadowing_sigma_db = 0.0;
  double shadowing_correlation_length = 4.0;  // cells
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(pathloss_exponent > 0.0)) throw ValidationError("pathloss_exponent must be > 0");
    if (!(wall_loss_db >= 0.0)) throw ValidationError("wall_loss_db must be >= 0");
    if (!(shadowing_sigma_db >= 0.0)) throw ValidationError("shadowing_sigma_db must be >= 0");
    if (!(shadowing_correlation_length >= 0.0)) {
      throw ValidationError("shadowing_correlation_length must be >= 0");
    }
  }

  friend bool operator==(const PropagationParams&, const PropagationParams&) = default;
};

inline Json to_json(const PropagationParams& p) {
  return {{"pathloss_exponent", p.pathloss_exponent},
          {"reference_loss_db", p.reference_loss_db},
          {"wall_loss_db", p.wall_loss_db},
          {"shadowing_sigma_db", p.shadowing_sigma_db},
          {"shadowing_correlation_length", p.shadowing_correlation_length},
          {"rng_seed", p.rng_seed}};
}

inline PropagationParams propagation_params_from_json(const Json& j) {
  PropagationParams p;
  for (const auto& [key, v] : j.items()) {
    if (key == "pathloss_exponent") p.pathloss_exponent = v.get<double>();
    else if (key == "reference_loss_db") p.reference_loss_db = v.get<double>();
    else if (key == "wall_loss_db") p.wall_loss_db = v.get<double>();
    else if (key == "shadowing_sigma_db") p.shadowing_sigma_db = v.get<double>();
    else if (key == "shadowing_correlation_length") p.shadowing_correlation_length = v.get<double>();
    else if (key == "rng_seed") p.rng_seed = v.get<std::uint64_t>();
    else throw ValidationError("propagation: unknown key '" + key + "'");
  }
  p.validate();
  return p;
}

inline void require_cell(const GeoMap& geo, Cell c, const char* what) {
  if (!geo.occupancy().contains(c)) {
    throw BoundsError(std::string(what) + " cell (" + std::to_string(c.x) + ", " +
                      std::to_string(c.y) + ") outside " + std::to_string(geo.width()) + "x" +
                      std::to_string(geo.height()) + " map");
  }
}

inline double pathloss_db(Cell tx, Cell rx, const GeoMap& geo, const PropagationParams& params) {
  require_cell(geo, tx, "tx");
  require_cell(geo, rx, "rx");
  const double dx = tx.x - rx.x;
  const double dy = tx.y - rx.y;
  const double d = geo.meters_per_cell() * std::sqrt(dx * dx + dy * dy);
  const int walls = count_wall_cells(tx, rx, geo);
  return params.reference_loss_db + 10.0 * params.pathloss_exponent * std::log10(std::max(d, 1.0)) +
         params.wall_loss_db * walls;
}

/// Zero-mean Gaussian field in dB with standard deviation sigma_db:
/// white noise smoothed by a separable Gaussian kernel whose taps are
/// scaled to unit energy, so the marginal std is exactly sigma_db.
inline Grid<double> shadowing_field_db(int width, int height, double sigma_db, double corr_length,
                                       std::uint64_t seed) {
  Grid<double> out(width, height, 0.0);
  if (sigma_db == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (corr_length <= 0.0) {
    for (auto& v : out.values()) v = sigma_db * normal(rng);
    return out;
  }
  const int radius = static_cast<int>(std::ceil(3.0 * corr_length));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double energy = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double t = std::exp(-0.5 * k * k / (corr_length * corr_length));
    taps[static_cast<std::size_t>(k + radius)] = t;
    energy += t * t;
  }
  for (auto& t : taps) t /= std::sqrt(energy);

  const int pw = width + 2 * radius;
  const int ph = height + 2 * radius;
  Grid<double> noise(pw, ph);
  for (auto& v : noise.values()) v = normal(rng);
  Grid<double> rows(width, ph, 0.0);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int k = 0; k <= 2 * radius; ++k) s += taps[static_cast<std::size_t>(k)] * noise(x + k, y);
      rows(x, y) = s;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int k = 0; k <= 2 * radius; ++k) s += taps[static_cast<std::size_t>(k)] * rows(x, y + k);
      out(x, y) = sigma_db * s;
    }
  return out;
}

/// Shadowing field seen from one transmitter; seeded by (rng_seed, tx cell).
inline Grid<double> shadowing_for(Cell tx, const GeoMap& geo, const PropagationParams& params) {
  return shadowing_field_db(geo.width(), geo.height(), params.shadowing_sigma_db,
                            params.shadowing_correlation_length,
                            derive_seed(params.rng_seed, {static_cast<std::uint64_t>(tx.x),
                                                          static_cast<std::uint64_t>(tx.y)}));
}

inline double large_scale_gain(Cell tx, Cell rx, const GeoMap& geo,
                               const PropagationParams& params) {
  const double pl = pathloss_db(tx, rx, geo, params);
  double gain = std::pow(10.0, -pl / 10.0);
  if (params.shadowing_sigma_db > 0.0) gain *= std::pow(10.0, shadowing_for(tx, geo, params)[rx] / 10.0);
  return gain;
}

/// Average received power per cell: sum over transmitters of
/// P_i * rho(i, cell), plus the noise power of that cell. Linear watts.
inline RadioMap simulate_radio_map(const TransmitterField& tx, const GeoMap& geo,
                                   const NoiseMap& noise, const PropagationParams& params) {
  params.validate();
  if (tx.width() != geo.width() || tx.height() != geo.height()) {
    throw ShapeError("simulate_radio_map: transmitter field and geo map differ in shape");
  }
  require_same_shape(noise.grid(), geo.occupancy(), "simulate_radio_map (noise vs geo)");

  Grid<double> signal(geo.width(), geo.height(), 0.0);
  for (const auto& t : tx.transmitters()) {
    require_cell(geo, t.cell, "transmitter");
    const bool shadowed = params.shadowing_sigma_db > 0.0;
    const Grid<double> shadow = shadowed ? shadowing_for(t.cell, geo, params) : Grid<double>{};
    for (int y = 0; y < geo.height(); ++y)
      for (int x = 0; x < geo.width(); ++x) {
        const Cell rx{x, y};
        double gain = std::pow(10.0, -pathloss_db(t.cell, rx, geo, params) / 10.0);
        if (shadowed) gain *= std::pow(10.0, shadow[rx] / 10.0);
        signal[rx] += t.power_w * gain;
      }
  }
  Grid<double> total(geo.width(), geo.height());
  for (std::size_t i = 0; i < total.size(); ++i)
    total.values()[i] = signal.values()[i] + noise.grid().values()[i];
  return RadioMap(std::move(total), Domain::linear_power);
}

/// RSS observations taken from the map at the given cells.
inline RssField sample_rss(const RadioMap& map, std::vector<Cell> locations) {
  return RssField::sample(map, std::move(locations));
}

}  // namespace crme::propagation
