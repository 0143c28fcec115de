#include <gtest/gtest.h>

#include <fstream>
#include <queue>

#include "occlane/error.hpp"
#include "occlane/geometry.hpp"
#include "occlane/image_io.hpp"
#include "occlane/manifest.hpp"
#include "occlane/morphology.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace occlane;
using occlane::testing::TempDir;
using occlane::testing::flood_components;
using occlane::testing::naive_dilate;
using occlane::testing::naive_erode;

namespace {

FrameRecord frame(const std::string& id) {
  FrameRecord f;
  f.id = id;
  f.clear_image = "frames/" + id + ".png";
  f.lane_mask = "masks/" + id + ".png";
  f.occlusion_boxes = std::vector<BBox>{};
  return f;
}

}  // namespace

TEST(Raster, RejectsBadDimensionsAndData) {
  EXPECT_THROW(RasterImage(0, 4), ValidationError);
  EXPECT_THROW(RasterMask(3, 3, std::vector<std::uint8_t>(8)), ValidationError);
  RasterImage img(2, 3, 7);
  EXPECT_EQ(img.bytes().size(), 18u);
  EXPECT_EQ(img.at(1, 2, 2), 7);
}

TEST(Raster, LumaUsesIntegerWeights) {
  RasterImage img(1, 1);
  img.at(0, 0, 0) = 255;
  EXPECT_EQ(luma(img).at(0, 0), (299 * 255 + 500) / 1000);
  RasterImage white(2, 2, 255);
  EXPECT_EQ(count_positive(luma(white)), 4u);
}

TEST(Binarize, ThresholdSemantics) {
  RasterMask m(3, 3, 127);
  EXPECT_EQ(count_positive(binarize(m, 128)), 0u);
  EXPECT_EQ(count_positive(binarize(m, 127)), 9u);
}

TEST(Binarize, MatchesPerPixelOracleAndIsIdempotent) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    RasterMask m(17, 9);
    for (auto& v : m.bytes()) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const int t = rng.uniform_int(0, 255);
    const RasterMask b = binarize(m, t);
    for (std::size_t i = 0; i < m.bytes().size(); ++i) {
      ASSERT_EQ(b.bytes()[i], m.bytes()[i] >= t ? 255 : 0);
    }
    EXPECT_EQ(binarize(b, t), b);
    EXPECT_EQ(binarize(b, 128), b);
  }
}

TEST(Dilate, RadiusZeroIsIdentity) {
  Rng rng(3);
  const RasterMask m = occlane::testing::random_mask(rng, 12, 8, 0.3);
  EXPECT_EQ(dilate(m, 0), m);
}

TEST(Dilate, SinglePixelGrowsToSquare) {
  RasterMask m(5, 5);
  m.at(2, 2) = kPositive;
  const RasterMask d = dilate(m, 1);
  EXPECT_EQ(count_positive(d), 9u);
  for (int y = 1; y <= 3; ++y) {
    for (int x = 1; x <= 3; ++x) EXPECT_EQ(d.at(x, y), kPositive);
  }
}

TEST(Dilate, MatchesWindowScanOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const RasterMask m = occlane::testing::random_mask(rng, 32, 32, 0.05);
    const int r = trial % 2 ? 3 : rng.uniform_int(1, 5);
    EXPECT_EQ(dilate(m, r), naive_dilate(m, r));
  }
}

TEST(Dilate, ComposesAndIsMonotone) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const RasterMask m = occlane::testing::random_mask(rng, 24, 19, 0.04);
    const int a = rng.uniform_int(0, 3);
    const int b = rng.uniform_int(0, 3);
    const RasterMask d = dilate(m, a + b);
    EXPECT_EQ(d, dilate(dilate(m, a), b));
    EXPECT_EQ(mask_union(m, d), d);
  }
}

TEST(Erode, MatchesWindowScanOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const RasterMask m = occlane::testing::random_mask(rng, 20, 15, 0.7);
    const int r = rng.uniform_int(1, 3);
    EXPECT_EQ(erode(m, r), naive_erode(m, r));
    EXPECT_EQ(open(m, r), naive_dilate(naive_erode(m, r), r));
  }
}

TEST(ConnectedComponents, MatchesFloodFillOracle) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const RasterMask m = occlane::testing::random_mask(rng, 30, 22, 0.35);
    const auto got = connected_components(m);
    const auto want = flood_components(m);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].area, want[i].area);
      EXPECT_EQ(got[i].box, want[i].box);
    }
  }
}

TEST(Geometry, PolygonMaskCoversPixelCentres) {
  const Polygon square{{1, 1}, {5, 1}, {5, 4}, {1, 4}};
  const RasterMask m = polygon_mask(square, Size{8, 6});
  EXPECT_EQ(count_positive(m), 12u);
  EXPECT_EQ(m.at(1, 1), kPositive);
  EXPECT_EQ(m.at(4, 3), kPositive);
  EXPECT_EQ(m.at(5, 3), 0);
}

TEST(Geometry, ClipKeepsBoxesInsideFrame) {
  const BBox b = clip(BBox{-3, 2, 12, 20, 1, 0.5}, Size{10, 10});
  EXPECT_EQ(b, (BBox{0, 2, 10, 10, 1, 0.5}));
  EXPECT_EQ(traffic_classes().size(), 7u);
}

TEST(ImageIo, BlackImageDecodes) {
  TempDir dir("io");
  save_raster(RasterImage(2, 2), dir / "black.png");
  const auto v = load_raster(dir / "black.png");
  ASSERT_TRUE(std::holds_alternative<RasterImage>(v));
  EXPECT_EQ(std::get<RasterImage>(v), RasterImage(2, 2));
}

TEST(ImageIo, SingleChannelIsMask) {
  TempDir dir("io");
  RasterMask m(4, 4);
  m.at(0, 0) = kPositive;
  save_raster(m, dir / "m.png");
  const auto v = load_raster(dir / "m.png");
  ASSERT_TRUE(std::holds_alternative<RasterMask>(v));
  EXPECT_EQ(count_positive(std::get<RasterMask>(v)), 1u);
  save_raster(RasterMask(4, 4), dir / "z.png");
  EXPECT_EQ(count_positive(load_mask(dir / "z.png")), 0u);
}

TEST(ImageIo, RandomRoundTripIsLossless) {
  TempDir dir("io");
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const RasterImage img = occlane::testing::random_image(rng, 64, 64);
    save_raster(img, dir / "r.png");
    EXPECT_EQ(load_image(dir / "r.png"), img);
    RasterRgba rgba(9, 7);
    for (auto& v : rgba.bytes()) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    save_raster(rgba, dir / "s.png");
    EXPECT_EQ(load_rgba(dir / "s.png"), rgba);
  }
}

TEST(ImageIo, OverwriteAndErrors) {
  TempDir dir("io");
  save_raster(RasterMask(3, 3), dir / "a" / "b" / "m.png");
  save_raster(RasterMask(3, 3, 255), dir / "a" / "b" / "m.png");
  EXPECT_EQ(count_positive(load_mask(dir / "a" / "b" / "m.png")), 9u);
  try {
    load_image(dir / "missing.png");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.png"), std::string::npos);
  }
  EXPECT_THROW(load_image(dir / "a" / "b" / "m.png"), IoError);
  EXPECT_EQ(png_dimensions(dir / "a" / "b" / "m.png"), (Size{3, 3}));
}

TEST(Manifest, MinimalFrameGetsDefaults) {
  TempDir dir("man");
  std::ofstream(dir / "manifest.json")
      << R"({"schema_version": 1, "frames": [{"id": "a", "clear_image": "a.png", "lane_mask": "m.png"}]})";
  const DatasetManifest m = read_manifest(dir / "manifest.json", {true});
  ASSERT_EQ(m.frames.size(), 1u);
  EXPECT_EQ(m.class_names, traffic_classes());
  EXPECT_FALSE(m.frames[0].occluded_image);
  EXPECT_FALSE(m.frames[0].occlusion_boxes);
  EXPECT_EQ(m.base_dir, dir.path());
}

TEST(Manifest, InvalidBoxNamesFrame) {
  TempDir dir("man");
  std::ofstream(dir / "manifest.json") << R"({"schema_version": 1, "frames": [
      {"id": "frame_7", "clear_image": "a.png", "lane_mask": "m.png", "occlusion_boxes": [[5, 1, 5, 4, 0, 1.0]]}]})";
  try {
    read_manifest(dir / "manifest.json", {true});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("frame_7"), std::string::npos);
  }
}

TEST(Manifest, RejectsSchemaDuplicatesAndDanglingPaths) {
  TempDir dir("man");
  std::ofstream(dir / "v2.json") << R"({"schema_version": 2, "frames": []})";
  EXPECT_THROW(read_manifest(dir / "v2.json"), ValidationError);
  std::ofstream(dir / "dup.json") << R"({"schema_version": 1, "frames": [
      {"id": "a", "clear_image": "a.png", "lane_mask": "m.png"},
      {"id": "a", "clear_image": "b.png", "lane_mask": "m.png"}]})";
  EXPECT_THROW(read_manifest(dir / "dup.json", {true}), ValidationError);
  std::ofstream(dir / "dangling.json")
      << R"({"schema_version": 1, "frames": [{"id": "a", "clear_image": "nope.png", "lane_mask": "m.png"}]})";
  EXPECT_THROW(read_manifest(dir / "dangling.json"), ValidationError);
  EXPECT_NO_THROW(read_manifest(dir / "dangling.json", {true}));
}

TEST(Manifest, OutOfBoundsBoxRejectedWhenAssetsChecked) {
  TempDir dir("man");
  save_raster(RasterImage(10, 10), dir / "a.png");
  save_raster(RasterMask(10, 10), dir / "m.png");
  std::ofstream(dir / "manifest.json") << R"({"schema_version": 1, "frames": [
      {"id": "a", "clear_image": "a.png", "lane_mask": "m.png", "occlusion_boxes": [[0, 0, 11, 4, 0, 1.0]]}]})";
  EXPECT_THROW(read_manifest(dir / "manifest.json"), ValidationError);
}

TEST(Manifest, RoundTripAndDeterministicBytes) {
  TempDir dir("man");
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    DatasetManifest m;
    const int n = rng.uniform_int(0, 5);
    for (int i = 0; i < n; ++i) {
      FrameRecord f = frame("f" + std::to_string(i));
      if (rng.unit() < 0.5) f.occluded_image = "frames/f" + std::to_string(i) + "_occ.png";
      if (rng.unit() < 0.3) {
        f.occlusion_boxes.reset();
      } else {
        for (int k = rng.uniform_int(0, 3); k > 0; --k) {
          const int x = rng.uniform_int(0, 50), y = rng.uniform_int(0, 50);
          f.occlusion_boxes->push_back(
              BBox{x, y, x + rng.uniform_int(1, 20), y + rng.uniform_int(1, 20), rng.uniform_int(0, 6), rng.unit()});
        }
      }
      if (rng.unit() < 0.5) f.road_roi = Polygon{{0, 10}, {rng.uniform(10, 30), 0.5}, {40, 10.25}};
      f.seed = static_cast<std::int64_t>(rng.next() >> 1);
      f.source = "test";
      m.frames.push_back(f);
    }
    write_manifest(m, dir / "a.json");
    write_manifest(m, dir / "b.json");
    EXPECT_EQ(occlane::testing::file_bytes(dir / "a.json"), occlane::testing::file_bytes(dir / "b.json"));
    EXPECT_EQ(read_manifest(dir / "a.json", {true}), m);
  }
}

TEST(Manifest, EmptyFrameListIsValid) {
  TempDir dir("man");
  write_manifest(DatasetManifest{}, dir / "m.json");
  EXPECT_NE(manifest_to_string(DatasetManifest{}).find("\"frames\": []"), std::string::npos);
  EXPECT_TRUE(read_manifest(dir / "m.json").frames.empty());
}
