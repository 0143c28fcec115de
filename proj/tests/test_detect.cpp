#include <gtest/gtest.h>

#include <cstdlib>

#include "occlane/augment.hpp"
#include "occlane/detect.hpp"
#include "occlane/error.hpp"
#include "occlane/metrics.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace occlane;
using occlane::testing::flood_components;
using occlane::testing::naive_open;

namespace {

FrameRecord frame_with(std::vector<BBox> boxes) {
  FrameRecord f;
  f.id = "f";
  f.occlusion_boxes = std::move(boxes);
  return f;
}

RasterImage flat(int w, int h, std::uint8_t v) {
  RasterImage img(w, h);
  for (auto& b : img.bytes()) b = v;
  return img;
}

OccluderSprite opaque(int w, int h, std::uint8_t v) {
  OccluderSprite s;
  s.rgba = RasterRgba(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) s.rgba.at(x, y, c) = v;
      s.rgba.at(x, y, 3) = 255;
    }
  }
  return s;
}

bool boxes_overlap(const BBox& a, const BBox& b) {
  return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

BBox grow_clip(const BBox& b, int d, Size s) {
  return BBox{std::max(0, b.x_min - d), std::max(0, b.y_min - d), std::min(s.width, b.x_max + d),
              std::min(s.height, b.y_max + d), 0, 1.0};
}

}  // namespace

TEST(DetectOracle, IdentityWithFullFilter) {
  const std::vector<BBox> boxes{{1, 1, 5, 5, 0, 0.4}, {10, 2, 20, 9, 1, 0.9}, {3, 8, 6, 12, 3, 1.0}};
  const auto out = detect_oracle(frame_with(boxes), DetectorConfig{});
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out[i].x_min, boxes[i].x_min);
    EXPECT_EQ(out[i].y_max, boxes[i].y_max);
    EXPECT_EQ(out[i].class_id, boxes[i].class_id);
    EXPECT_EQ(out[i].confidence, 1.0);
  }
}

TEST(DetectOracle, ClassFilter) {
  const std::vector<BBox> boxes{{1, 1, 5, 5, 0, 1}, {10, 2, 20, 9, 1, 1}, {3, 8, 6, 12, 0, 1}};
  DetectorConfig cfg;
  cfg.class_filter = {0};
  const auto cars = detect_oracle(frame_with(boxes), cfg);
  ASSERT_EQ(cars.size(), 2u);
  for (const auto& b : cars) EXPECT_EQ(b.class_id, 0);
  cfg.class_filter = {};
  EXPECT_TRUE(detect_oracle(frame_with(boxes), cfg).empty());
}

TEST(DetectOracle, MissingBoxesIsAnError) {
  FrameRecord f;
  f.id = "nobox";
  try {
    detect_oracle(f, DetectorConfig{});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("nobox"), std::string::npos);
  }
}

TEST(ChangeMask, MatchesPerPixelOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const RasterImage a = occlane::testing::random_image(rng, 23, 17);
    const RasterImage b = occlane::testing::random_image(rng, 23, 17);
    const int t = rng.uniform_int(0, 255);
    const RasterMask m = change_mask(a, b, t);
    for (int y = 0; y < 17; ++y) {
      for (int x = 0; x < 23; ++x) {
        int d = 0;
        for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(a.at(x, y, c) - b.at(x, y, c)));
        ASSERT_EQ(m.at(x, y) == kPositive, d >= t);
      }
    }
  }
}

TEST(DetectDiff, IdenticalFramesGiveNothing) {
  Rng rng(1);
  const RasterImage img = occlane::testing::random_image(rng, 64, 48);
  EXPECT_TRUE(detect_diff(img, img, DetectorConfig{}).empty());
}

TEST(DetectDiff, DimensionMismatchIsAnError) {
  EXPECT_THROW(detect_diff(flat(8, 8, 0), flat(9, 8, 0), DetectorConfig{}), ValidationError);
}

TEST(DetectDiff, SingleSpriteIsFound) {
  Rng gen(21);
  for (int trial = 0; trial < 10; ++trial) {
    const RasterImage clear = flat(96, 64, 90);
    const PixelPos pos{gen.uniform_int(0, 70), gen.uniform_int(0, 40)};
    const auto r = composite_occluder(clear, opaque(20, 20, 200), pos, 1.0);
    const auto boxes = detect_diff(r.occluded, clear, DetectorConfig{});
    ASSERT_EQ(boxes.size(), 1u);
    EXPECT_GE(box_iou(boxes[0], r.box), 0.9);
    EXPECT_EQ(boxes[0].class_id, 0);
  }
}

TEST(DetectDiff, TwoSeparatedSpritesGiveTwoBoxes) {
  const RasterImage clear = flat(96, 64, 90);
  auto first = composite_occluder(clear, opaque(20, 20, 200), PixelPos{5, 10}, 1.0);
  auto second = composite_occluder(first.occluded, opaque(20, 20, 30), PixelPos{35, 20}, 1.0);
  const auto boxes = detect_diff(second.occluded, clear, DetectorConfig{});
  ASSERT_EQ(boxes.size(), 2u);
}

TEST(DetectDiff, MatchesOpenAndFloodOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const int w = rng.uniform_int(20, 50);
    const int h = rng.uniform_int(20, 50);
    const RasterImage clear = flat(w, h, 100);
    RasterImage occ = clear;
    // random rectangles of change plus speckle
    for (int k = rng.uniform_int(1, 5); k > 0; --k) {
      const int x0 = rng.uniform_int(0, w - 1), y0 = rng.uniform_int(0, h - 1);
      const int x1 = std::min(w, x0 + rng.uniform_int(1, 15)), y1 = std::min(h, y0 + rng.uniform_int(1, 15));
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) occ.at(x, y, rng.uniform_int(0, 2)) = 180;
      }
    }
    for (int k = 0; k < 20; ++k) occ.at(rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1), 1) = 0;
    DetectorConfig cfg;
    cfg.min_component_area = rng.uniform_int(1, 40);
    cfg.open_radius = rng.uniform_int(0, 2);
    const auto got = detect_diff(occ, clear, cfg);
    std::vector<Component> want;
    for (const auto& c : flood_components(naive_open(change_mask(occ, clear, cfg.diff_threshold), cfg.open_radius))) {
      if (c.area >= cfg.min_component_area) want.push_back(c);
    }
    ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].x_min, want[i].box.x_min);
      EXPECT_EQ(got[i].y_min, want[i].box.y_min);
      EXPECT_EQ(got[i].x_max, want[i].box.x_max);
      EXPECT_EQ(got[i].y_max, want[i].box.y_max);
      EXPECT_DOUBLE_EQ(got[i].confidence,
                       std::min(1.0, static_cast<double>(want[i].area) / (4.0 * cfg.min_component_area)));
    }
  }
}

TEST(DetectDiff, BoxesHoldEnoughChangedPixels) {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const RasterImage clear = occlane::testing::random_image(rng, 40, 40);
    RasterImage occ = clear;
    for (int k = 0; k < 300; ++k) occ.at(rng.uniform_int(0, 39), rng.uniform_int(0, 39), 0) ^= 0x80;
    DetectorConfig cfg;
    cfg.open_radius = 0;
    cfg.min_component_area = 5;
    const RasterMask changed = change_mask(occ, clear, cfg.diff_threshold);
    for (const auto& b : detect_diff(occ, clear, cfg)) {
      long n = 0;
      for (int y = b.y_min; y < b.y_max; ++y) {
        for (int x = b.x_min; x < b.x_max; ++x) n += changed.at(x, y) == kPositive;
      }
      EXPECT_GE(n, cfg.min_component_area);
    }
  }
}

TEST(DetectDiff, InvariantToSharedIntensityShift) {
  Rng rng(51);
  for (int trial = 0; trial < 8; ++trial) {
    RasterImage clear(48, 40);
    for (auto& v : clear.bytes()) v = static_cast<std::uint8_t>(rng.uniform_int(30, 200));
    RasterImage occ = clear;
    for (int y = 10; y < 25; ++y) {
      for (int x = 5; x < 30; ++x) occ.at(x, y, 2) = static_cast<std::uint8_t>(occ.at(x, y, 2) + 40);
    }
    DetectorConfig cfg;
    const int shift = rng.uniform_int(-cfg.diff_threshold + 1, cfg.diff_threshold - 1);
    RasterImage cs = clear, os = occ;
    for (auto& v : cs.bytes()) v = static_cast<std::uint8_t>(v + shift);
    for (auto& v : os.bytes()) v = static_cast<std::uint8_t>(v + shift);
    EXPECT_EQ(detect_diff(os, cs, cfg), detect_diff(occ, clear, cfg));
  }
}

TEST(BoxesToMask, Examples) {
  const RasterMask m0 = boxes_to_mask({BBox{2, 2, 4, 4, 0, 1}}, Size{8, 8}, 0);
  EXPECT_EQ(count_positive(m0), 4u);
  const RasterMask m2 = boxes_to_mask({BBox{2, 2, 4, 4, 0, 1}}, Size{8, 8}, 2);
  EXPECT_EQ(count_positive(m2), 36u);
  EXPECT_EQ(m2, occlane::testing::naive_dilate(m0, 2));
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) EXPECT_EQ(m2.at(x, y) == kPositive, x < 6 && y < 6);
  }
}

TEST(BoxesToMask, UnionBoundAndDisjointEquality) {
  Rng rng(61);
  const Size size{40, 30};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<BBox> boxes;
    for (int k = rng.uniform_int(1, 4); k > 0; --k) {
      const int x0 = rng.uniform_int(-5, 38), y0 = rng.uniform_int(-5, 28);
      boxes.push_back(BBox{x0, y0, x0 + rng.uniform_int(1, 12), y0 + rng.uniform_int(1, 12), 0, 1.0});
    }
    const int d = rng.uniform_int(0, 3);
    const RasterMask m = boxes_to_mask(boxes, size, d);
    long sum = 0;
    bool disjoint = true;
    std::vector<BBox> grown;
    for (const auto& b : boxes) grown.push_back(grow_clip(b, d, size));
    for (std::size_t i = 0; i < grown.size(); ++i) {
      sum += std::max(0, grown[i].x_max - grown[i].x_min) * std::max(0, grown[i].y_max - grown[i].y_min);
      for (std::size_t j = i + 1; j < grown.size(); ++j) disjoint = disjoint && !boxes_overlap(grown[i], grown[j]);
    }
    const long got = static_cast<long>(count_positive(m));
    EXPECT_LE(got, sum);
    EXPECT_EQ(got == sum, disjoint) << "trial " << trial;
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        bool in = false;
        for (const auto& g : grown) in = in || (x >= g.x_min && x < g.x_max && y >= g.y_min && y < g.y_max);
        ASSERT_EQ(m.at(x, y) == kPositive, in);
      }
    }
  }
}

TEST(DetectorConfig, Validation) {
  DetectorConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.min_component_area = 0;
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg = DetectorConfig{};
  cfg.confidence_threshold = 1.5;
  EXPECT_THROW(validate(cfg), ValidationError);
  cfg = DetectorConfig{};
  cfg.mode = DetectorMode::external;
  EXPECT_THROW(validate(cfg), ValidationError);
}
