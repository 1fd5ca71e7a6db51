#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "crme/core/files.hpp"
#include "crme/core/grid.hpp"
#include "crme/core/png_io.hpp"
#include "crme/core/seed.hpp"
#include "crme/core/types.hpp"
#include "crme/core/units.hpp"

namespace crme {
namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("crme_core_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Units, HundredMilliwattsIsTwentyDbm) { EXPECT_NEAR(watts_to_dbm(0.1), 20.0, 1e-12); }

TEST(Units, ThirtyDbmIsOneWatt) { EXPECT_NEAR(dbm_to_watts(30.0), 1.0, 1e-12); }

TEST(Units, ZeroWattsClampsToFloor) {
  EXPECT_EQ(watts_to_dbm(0.0), kDefaultFloorDbm);
  EXPECT_EQ(watts_to_dbm(1e-30), kDefaultFloorDbm);
}

TEST(Units, RoundTripAboveFloor) {
  for (double dbm : {-140.0, -95.5, -40.0, 0.0, 33.0}) EXPECT_NEAR(watts_to_dbm(dbm_to_watts(dbm)), dbm, 1e-9);
}

TEST(Units, MapConversionTagsDomains) {
  RadioMap lin(Grid<double>(2, 1, std::vector<double>{1e-3, 0.0}), Domain::linear_power);
  const auto db = linear_to_db(lin);
  EXPECT_EQ(db.domain(), Domain::db);
  EXPECT_NEAR(db.grid()(0, 0), 0.0, 1e-12);
  EXPECT_EQ(db.grid()(1, 0), kDefaultFloorDbm);
  EXPECT_THROW(linear_to_db(db), DomainError);
  EXPECT_EQ(db_to_linear(db).domain(), Domain::linear_power);
}

TEST(Grid, IndexingIsRowMajor) {
  Grid<int> g(3, 2);
  g(2, 1) = 7;
  EXPECT_EQ(g.values()[1 * 3 + 2], 7);
  EXPECT_THROW(g.at(3, 0), BoundsError);
  EXPECT_THROW(Grid<int>(0, 2), ShapeError);
  EXPECT_THROW(Grid<int>(2, 2, std::vector<int>{1, 2, 3}), ShapeError);
}

TEST(Grid, FourQuarterTurnsAreIdentity) {
  Grid<int> g(3, 2, std::vector<int>{1, 2, 3, 4, 5, 6});
  auto r = rotate90(g);
  EXPECT_EQ(r.width(), 2);
  EXPECT_EQ(r.height(), 3);
  EXPECT_EQ(rotate90(rotate90(rotate90(r))), g);
  EXPECT_EQ(mirror_x(mirror_x(g)), g);
}

TEST(GeoMap, RejectsOverlapAndOutOfBounds) {
  EXPECT_THROW(GeoMap(4, 4, {{0, {{1, 1}}}, {1, {{1, 1}}}}), ValidationError);
  EXPECT_THROW(GeoMap(4, 4, {{0, {{4, 1}}}}), BoundsError);
  EXPECT_THROW(GeoMap(4, 4, {{0, {{1, 1}}}, {0, {{2, 2}}}}), ValidationError);
}

TEST(GeoMap, FromOccupancyLabelsComponents) {
  Grid<std::uint8_t> occ(4, 4, 0);
  occ(0, 0) = occ(1, 0) = 1;
  occ(3, 3) = 1;
  const auto geo = GeoMap::from_occupancy(occ);
  ASSERT_EQ(geo.buildings().size(), 2u);
  EXPECT_EQ(geo.building(0).cells.size(), 2u);
  EXPECT_EQ(geo.building_cell_count(), 3u);
  EXPECT_EQ(geo.free_cells().size(), 13u);
  const auto cut = geo.without({0});
  EXPECT_EQ(cut.building_cell_count(), 1u);
  EXPECT_THROW(geo.without({5}), ValidationError);
}

TEST(TransmitterField, Validation) {
  GeoMap geo(4, 4, {{0, {{1, 1}}}});
  EXPECT_THROW(TransmitterField(geo, {{{1, 1}, 1.0}}), ValidationError);
  EXPECT_THROW(TransmitterField(geo, {{{0, 0}, 0.0}}), ValidationError);
  EXPECT_THROW(TransmitterField(geo, {{{0, 0}, 1.0}, {{0, 0}, 2.0}}), ValidationError);
  EXPECT_THROW(TransmitterField(geo, {{{9, 0}, 1.0}}), BoundsError);
  EXPECT_NO_THROW(TransmitterField(geo, {}));
}

TEST(RadioMap, DomainValidation) {
  EXPECT_THROW(RadioMap(Grid<double>(1, 1, 1.5), Domain::gray), ValidationError);
  EXPECT_THROW(RadioMap(Grid<double>(1, 1, -1.0), Domain::linear_power), ValidationError);
  EXPECT_THROW(RadioMap(Grid<double>(1, 1, std::nan("")), Domain::db), NumericError);
  EXPECT_NO_THROW(RadioMap(Grid<double>(1, 1, -80.0), Domain::db));
  EXPECT_THROW(domain_from_string("watts"), ValidationError);
}

TEST(RssField, SamplesAtLocationsZeroElsewhere) {
  RadioMap m(Grid<double>(2, 2, std::vector<double>{0.1, 0.2, 0.3, 0.4}), Domain::gray);
  const auto f = RssField::sample(m, {{1, 1}, {0, 0}, {1, 1}});
  EXPECT_EQ(f.sample_locations().size(), 2u);
  EXPECT_EQ(f.grid()(0, 0), 0.1);
  EXPECT_EQ(f.grid()(1, 0), 0.0);
  EXPECT_EQ(f.grid()(1, 1), 0.4);
  EXPECT_THROW(RssField::sample(m, {{2, 0}}), BoundsError);
}

TEST(Png, HalfGrayEncodesTo128) {
  EXPECT_EQ(gray_to_pixel(0.5), 128);
  const auto dir = scratch("png");
  RadioMap m(Grid<double>(3, 2, 0.5), Domain::gray);
  write_gray_png(m, dir / "half.png");
  const auto back = read_gray_png(dir / "half.png");
  for (double v : back.grid().values()) EXPECT_EQ(v, 128.0 / 255.0);
}

TEST(Png, QuantizedRoundTripIsExact) {
  const auto dir = scratch("png_rt");
  Grid<double> g(16, 16);
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = static_cast<double>(i % 256) / 255.0;
  write_gray_png(RadioMap(g, Domain::gray), dir / "ramp.png");
  EXPECT_EQ(read_gray_png(dir / "ramp.png").grid(), g);
}

TEST(Png, CorruptFileRaisesIoError) {
  const auto dir = scratch("png_bad");
  std::ofstream(dir / "bad.png") << "not a png at all";
  EXPECT_THROW(read_png8(dir / "bad.png"), IoError);
  EXPECT_THROW(read_png8(dir / "missing.png"), IoError);
}

TEST(Seeds, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
}

TEST(Files, AtomicWriteAndChecksum) {
  const auto dir = scratch("files");
  write_file_atomic(dir / "a.txt", "hello");
  EXPECT_EQ(read_file(dir / "a.txt"), "hello");
  EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
  EXPECT_EQ(crc32_of("hello"), 0x3610a686u);
  EXPECT_EQ(crc32_of_file(dir / "a.txt"), 0x3610a686u);
  EXPECT_THROW(read_file(dir / "nope"), IoError);
}

}  // namespace
}  // namespace crme
