#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "crme/core/png_io.hpp"
#include "crme/dataset/builder.hpp"
#include "crme/dataset/codec.hpp"
#include "crme/dataset/radiomapseer.hpp"
#include "crme/dataset/record.hpp"
#include "crme/dataset/scene.hpp"

namespace crme::dataset {
namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("crme_dataset_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

DatasetConfig small_config(int n, std::uint64_t seed = 5) {
  DatasetConfig c;
  c.num_records = n;
  c.seed = seed;
  c.city.width = 32;
  c.city.height = 32;
  c.city.max_side = 8;
  return c;
}

TEST(Codec, MidpointQuantizesTo128) {
  const GrayCodec c;
  EXPECT_EQ(c.encode(-95.0), 128.0 / 255.0);
  EXPECT_EQ(c.encode(-150.0), 0.0);
  EXPECT_EQ(c.encode(-40.0), 1.0);
  EXPECT_EQ(c.encode(-200.0), 0.0);
  EXPECT_EQ(c.encode(0.0), 1.0);
}

TEST(Codec, DecodeInvertsWithinHalfStep) {
  const GrayCodec c;
  const double half_step = 0.5 * (c.ceiling_dbm - c.floor_dbm) / 255.0;
  for (double dbm = -150.0; dbm <= -40.0; dbm += 1.7) EXPECT_LE(std::abs(c.decode(c.encode(dbm)) - dbm), half_step + 1e-12);
}

TEST(Codec, ValidationAndDomains) {
  EXPECT_THROW((GrayCodec{-40.0, -150.0, 256}.validate()), ValidationError);
  EXPECT_THROW((GrayCodec{-150.0, -40.0, 1}.validate()), ValidationError);
  RadioMap gray(Grid<double>(1, 1, 0.5), Domain::gray);
  EXPECT_THROW(to_gray(gray, GrayCodec{}), DomainError);
  EXPECT_EQ(gray_codec_from_json(to_json(GrayCodec{})), GrayCodec{});
}

TEST(Users, DrawsAreDistinctAndOnFreeCells) {
  const GeoMap geo(8, 8, {{0, {{1, 1}, {1, 2}}}});
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto cells = draw_user_locations(geo, {5, 20}, rng);
    std::set<Cell> uniq(cells.begin(), cells.end());
    EXPECT_EQ(uniq.size(), cells.size());
    EXPECT_GE(cells.size(), 5u);
    EXPECT_LE(cells.size(), 20u);
    for (Cell c : cells) EXPECT_FALSE(geo.is_building(c));
  }
}

TEST(Users, CountMeanMatchesUniformDistribution) {
  const UserCountDistribution d{250, 350};
  Rng rng(17);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += d.draw(rng);
  const double mean = sum / n;
  EXPECT_GE(mean, 295.0);
  EXPECT_LE(mean, 305.0);
}

TEST(Users, TooManyOrInvalidRange) {
  const GeoMap geo(2, 2, {});
  Rng rng(1);
  EXPECT_THROW(draw_user_locations(geo, {5, 5}, rng), ValidationError);
  EXPECT_THROW(draw_user_locations(geo, {3, 2}, rng), ValidationError);
  const GeoMap full = GeoMap::from_occupancy(Grid<std::uint8_t>(2, 2, 1));
  EXPECT_THROW(draw_user_locations(full, {1, 1}, rng), ValidationError);
}

TEST(Flawed, RemovedBuildingsAreASubset) {
  Rng rng(8);
  const GeoMap geo = generate_city(CityConfig{}, rng);
  ASSERT_GE(geo.buildings().size(), 3u);
  for (int t = 0; t < 20; ++t) {
    auto [flawed, ids] = make_flawed_map(geo, RemovalCount{1, 3}, rng);
    EXPECT_GE(ids.size(), 1u);
    EXPECT_LE(ids.size(), 3u);
    EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
    EXPECT_EQ(flawed.buildings().size() + ids.size(), geo.buildings().size());
    for (const auto& b : flawed.buildings()) EXPECT_EQ(geo.building(b.id), b);
    for (int y = 0; y < geo.height(); ++y)
      for (int x = 0; x < geo.width(); ++x) EXPECT_LE(flawed.occupancy()(x, y), geo.occupancy()(x, y));
  }
  auto [same, none] = make_flawed_map(geo, 0, rng);
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(same, geo);
  EXPECT_THROW(make_flawed_map(geo, 1000, rng), ValidationError);
}

TEST(City, BuildingsNeverTouch) {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const GeoMap geo = generate_city(CityConfig{}, rng);
    EXPECT_EQ(GeoMap::from_occupancy(geo.occupancy()).buildings().size(), geo.buildings().size());
  }
}

TEST(Sample, ChannelsAndMetadataAreConsistent) {
  const auto cfg = small_config(1);
  auto flawed_cfg = cfg;
  flawed_cfg.flaw = FlawSpec{{1, 2}};
  for (const auto& c : {cfg, flawed_cfg}) {
    const auto rec = synthesize_record(c, 0);
    EXPECT_EQ(rec.label.domain(), Domain::gray);
    EXPECT_EQ(rec.meta.num_samples, static_cast<int>(rec.meta.sample_locations.size()));
    const auto occ = rec.truth_occupancy();
    std::set<Cell> sampled(rec.meta.sample_locations.begin(), rec.meta.sample_locations.end());
    for (int y = 0; y < rec.height(); ++y)
      for (int x = 0; x < rec.width(); ++x) {
        const double v = rec.rss(x, y);
        EXPECT_TRUE(v == 0.0 || v == rec.label.grid()(x, y));
        if (sampled.contains({x, y})) {
          EXPECT_EQ(v, rec.label.grid()(x, y));
          EXPECT_EQ(occ(x, y), 0);
        } else {
          EXPECT_EQ(v, 0.0);
        }
      }
    EXPECT_EQ(rec.meta.flawed(), c.flaw.has_value());
    for (Cell cell : rec.meta.removed_cells) EXPECT_EQ(rec.map(cell.x, cell.y), 0.0);
  }
}

TEST(Sample, ResampleDrawsFromGroundTruthFreeCells) {
  auto cfg = small_config(1);
  cfg.flaw = FlawSpec{{1, 1}};
  const auto rec = synthesize_record(cfg, 0);
  const auto re = resample(rec, 40, 99);
  EXPECT_EQ(re.meta.sample_locations.size(), 40u);
  const auto occ = rec.truth_occupancy();
  for (Cell c : re.meta.sample_locations) EXPECT_EQ(occ[c], 0);
  EXPECT_EQ(resample(rec, 40, 99), re);
  EXPECT_EQ(re.label, rec.label);
  EXPECT_THROW(resample(rec, 100000, 1), ValidationError);
}

TEST(Record, DiskRoundTripIsExact) {
  auto cfg = small_config(1);
  cfg.flaw = FlawSpec{{1, 2}};
  auto rec = synthesize_record(cfg, 0);
  const auto dir = scratch("record");
  write_record(rec, dir);
  EXPECT_EQ(read_record(dir), rec);
}

TEST(Builder, ManifestAndReloadAndDeterminism) {
  const auto cfg = small_config(6);
  const auto a = scratch("build_a"), b = scratch("build_b");
  const auto manifest = build_dataset(cfg, a, 2);
  build_dataset(cfg, b, 1);
  EXPECT_EQ(manifest.at("count"), 6);
  EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
  for (int i = 0; i < 6; ++i)
    for (const char* f : kRecordFiles)
      EXPECT_EQ(read_file(a / "records" / record_id(i) / f), read_file(b / "records" / record_id(i) / f));
  const auto loaded = load_dataset(a);
  ASSERT_EQ(loaded.size(), 6u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(loaded[i], synthesize_record(cfg, i));
}

TEST(Builder, ShuffleIsSeededPermutation) {
  const auto cfg = small_config(8);
  const auto dir = scratch("shuffle");
  build_dataset(cfg, dir);
  auto ids = [&](std::uint64_t seed) {
    std::vector<std::string> out;
    for (const auto& r : load_dataset(dir, seed)) out.push_back(r.id);
    return out;
  };
  const auto s1 = ids(4), s2 = ids(4), s3 = ids(5);
  EXPECT_EQ(s1, s2);
  EXPECT_NE(s1, s3);
  auto sorted = s1;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::string> expect;
  for (int i = 0; i < 8; ++i) expect.push_back(record_id(i));
  EXPECT_EQ(sorted, expect);
}

TEST(Builder, CountMismatchIsRejected) {
  const auto dir = scratch("mismatch");
  build_dataset(small_config(3), dir);
  std::filesystem::remove_all(dir / "records" / record_id(1));
  EXPECT_THROW(DatasetReader{dir}, ValidationError);
}

TEST(Builder, ChecksumMismatchIsRejected) {
  const auto dir = scratch("checksum");
  build_dataset(small_config(2), dir);
  {
    std::ofstream f(dir / "records" / record_id(0) / "meta.json", std::ios::app);
    f << " ";
  }
  DatasetReader reader(dir);
  EXPECT_THROW(reader.read(0), ValidationError);
  EXPECT_NO_THROW(reader.read(1));
}

TEST(Builder, ZeroRecordsIsValid) {
  const auto dir = scratch("empty");
  build_dataset(small_config(0), dir);
  EXPECT_TRUE(load_dataset(dir).empty());
}

void write_mini_radiomapseer(const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "png" / "buildings_complete");
  std::filesystem::create_directories(root / "gain" / "DPM");
  Grid<std::uint8_t> b(16, 16, 0);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 8; ++x) b(x, y) = 255;
  write_png8(b, root / "png" / "buildings_complete" / "0.png");
  for (int tx = 0; tx < 2; ++tx) {
    Grid<std::uint8_t> g(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) g(x, y) = static_cast<std::uint8_t>(10 * tx + x + y);
    write_png8(g, root / "gain" / "DPM" / ("0_" + std::to_string(tx) + ".png"));
  }
}

TEST(RadioMapSeer, IngestsMiniLayout) {
  const auto root = scratch("rms");
  write_mini_radiomapseer(root);
  Rng rng(1);
  const auto recs = ingest_radiomapseer(root, {5, 10}, GrayCodec{}, rng);
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.width(), 16);
    EXPECT_EQ(r.map(5, 5), 1.0);
    EXPECT_EQ(r.map(0, 0), 0.0);
    EXPECT_EQ(r.label.grid()(3, 2), (5.0 + (r.id == "rms_0_1" ? 10.0 : 0.0)) / 255.0);
    for (Cell c : r.meta.sample_locations) EXPECT_EQ(r.map(c.x, c.y), 0.0);
  }
}

TEST(RadioMapSeer, CorruptPngRaisesIoError) {
  const auto root = scratch("rms_bad");
  write_mini_radiomapseer(root);
  std::ofstream(root / "gain" / "DPM" / "0_1.png", std::ios::trunc) << "garbage";
  Rng rng(1);
  EXPECT_THROW(ingest_radiomapseer(root, {5, 10}, GrayCodec{}, rng), IoError);
  EXPECT_THROW(ingest_radiomapseer(scratch("rms_none"), {5, 10}, GrayCodec{}, rng), IoError);
}

}  // namespace
}  // namespace crme::dataset
