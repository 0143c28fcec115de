#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "occlane/error.hpp"
#include "occlane/metrics.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace occlane;
using occlane::testing::brute_ap;
using occlane::testing::brute_confusion;
using occlane::testing::random_image;
using occlane::testing::random_mask;

namespace {

RasterMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  RasterMask m(w, h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.at(x, y) = kPositive;
  }
  return m;
}

BBox box(int x0, int y0, int x1, int y1, double conf = 1.0, int cls = 0) { return BBox{x0, y0, x1, y1, cls, conf}; }

}  // namespace

TEST(PixelConfusion, Examples) {
  RasterMask gt(5, 5);
  for (int i = 0; i < 10; ++i) gt.bytes()[i] = kPositive;
  const auto same = pixel_confusion(gt, gt);
  EXPECT_EQ(same, (PixelConfusion{10, 0, 0, 15}));
  RasterMask seven(5, 5);
  for (int i = 0; i < 7; ++i) seven.bytes()[i * 3] = kPositive;
  const auto miss = pixel_confusion(RasterMask(5, 5), seven);
  EXPECT_EQ(miss.fn, 7);
  EXPECT_EQ(miss.tp, 0);
  EXPECT_EQ(miss.fp, 0);
}

TEST(PixelConfusion, MatchesBruteForce) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const RasterMask a = random_mask(rng, 16, 16, rng.unit());
    const RasterMask b = random_mask(rng, 16, 16, rng.unit());
    ASSERT_EQ(pixel_confusion(a, b), brute_confusion(a, b));
  }
}

TEST(PixelConfusion, RejectsBadInput) {
  EXPECT_THROW(pixel_confusion(RasterMask(4, 4), RasterMask(4, 5)), ValidationError);
  RasterMask odd(4, 4);
  odd.at(1, 1) = 7;
  EXPECT_THROW(pixel_confusion(odd, RasterMask(4, 4)), ValidationError);
}

TEST(PixelScores, OverlappingRectangles) {
  // two 2x2 squares sharing a 1x2 strip
  const RasterMask a = rect_mask(6, 6, 0, 0, 2, 2);
  const RasterMask b = rect_mask(6, 6, 1, 0, 3, 2);
  const auto c = pixel_confusion(a, b);
  EXPECT_EQ(c.tp, 2);
  EXPECT_EQ(c.fp, 2);
  EXPECT_EQ(c.fn, 2);
  const auto s = pixel_scores(c);
  EXPECT_DOUBLE_EQ(s.iou, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.dice, 0.5);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
}

TEST(PixelScores, IdenticalDisjointAndEmpty) {
  const RasterMask a = rect_mask(8, 8, 1, 1, 4, 4);
  const auto same = pixel_scores(pixel_confusion(a, a));
  EXPECT_EQ(same.iou, 1.0);
  EXPECT_EQ(same.dice, 1.0);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  const auto apart = pixel_scores(pixel_confusion(a, rect_mask(8, 8, 5, 5, 8, 8)));
  EXPECT_EQ(apart.iou, 0.0);
  EXPECT_EQ(apart.dice, 0.0);
  const auto empty = pixel_scores(pixel_confusion(RasterMask(8, 8), RasterMask(8, 8)));
  EXPECT_TRUE(empty.both_empty);
  EXPECT_EQ(empty.iou, 1.0);
  EXPECT_EQ(empty.dice, 1.0);
  const auto no_pred = pixel_scores(pixel_confusion(RasterMask(8, 8), a));
  EXPECT_FALSE(no_pred.precision_defined);
  EXPECT_TRUE(no_pred.recall_defined);
  EXPECT_EQ(no_pred.recall, 0.0);
}

TEST(PixelScores, DiceIouIdentityAndSymmetry) {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const RasterMask a = random_mask(rng, 16, 16, rng.unit() * 0.6);
    const RasterMask b = random_mask(rng, 16, 16, rng.unit() * 0.6);
    const auto ab = pixel_scores(pixel_confusion(a, b));
    const auto ba = pixel_scores(pixel_confusion(b, a));
    ASSERT_LE(std::abs(ab.dice - 2.0 * ab.iou / (1.0 + ab.iou)), 1e-12);
    ASSERT_EQ(ab.iou, ba.iou);
    ASSERT_EQ(ab.dice, ba.dice);
    if (ab.precision_defined) ASSERT_EQ(ab.precision, ba.recall);
    ASSERT_GE(ab.iou, 0.0);
    ASSERT_LE(ab.iou, 1.0);
  }
}

TEST(Aggregate, SingleFrameMacroEqualsMicro) {
  const PixelConfusion c{5, 3, 2, 90};
  const PixelConfusion one[] = {c};
  const auto a = aggregate(one);
  EXPECT_EQ(a.macro, a.micro);
  EXPECT_EQ(a.micro, pixel_scores(c));
  EXPECT_EQ(a.frames, 1);
}

TEST(Aggregate, MeanOfZeroAndOne) {
  const PixelConfusion frames[] = {{0, 4, 4, 92}, {8, 0, 0, 92}};
  EXPECT_DOUBLE_EQ(aggregate(frames).macro.iou, 0.5);
}

TEST(Aggregate, MacroDiffersFromMicro) {
  // A: 4 px perfect. B: 100 px predicted, 50 right, 50 gt pixels missed.
  const PixelConfusion frames[] = {{4, 0, 0, 996}, {50, 50, 50, 850}};
  const auto a = aggregate(frames);
  EXPECT_DOUBLE_EQ(a.macro.iou, (1.0 + 50.0 / 150.0) / 2.0);
  EXPECT_DOUBLE_EQ(a.micro.iou, 54.0 / 154.0);
  EXPECT_DOUBLE_EQ(a.macro.precision, (1.0 + 0.5) / 2.0);
  EXPECT_DOUBLE_EQ(a.micro.precision, 54.0 / 104.0);
  EXPECT_EQ(a.total, (PixelConfusion{54, 50, 50, 1846}));
}

TEST(Aggregate, BothEmptyFramesExcludedAndCounted) {
  const PixelConfusion frames[] = {{0, 0, 0, 100}, {1, 1, 0, 98}, {0, 0, 0, 100}};
  const auto a = aggregate(frames);
  EXPECT_EQ(a.excluded_iou, 2);
  EXPECT_DOUBLE_EQ(a.macro.iou, 0.5);
  EXPECT_EQ(a.excluded_precision, 2);
  EXPECT_THROW(aggregate(std::span<const PixelConfusion>{}), ValidationError);
}

TEST(Aggregate, IdenticalFramesGiveEqualMacroAndMicro) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const PixelConfusion c{rng.uniform_int(1, 50), rng.uniform_int(0, 50), rng.uniform_int(0, 50), 100};
    const std::vector<PixelConfusion> frames(static_cast<std::size_t>(rng.uniform_int(1, 6)), c);
    const auto a = aggregate(frames);
    ASSERT_NEAR(a.macro.iou, a.micro.iou, 1e-12);
    ASSERT_NEAR(a.macro.dice, a.micro.dice, 1e-12);
  }
}

TEST(BoxIou, Examples) {
  EXPECT_EQ(box_iou(box(3, 4, 9, 9), box(3, 4, 9, 9)), 1.0);
  EXPECT_DOUBLE_EQ(box_iou(box(0, 0, 10, 10), box(5, 5, 15, 15)), 25.0 / 175.0);
  EXPECT_EQ(box_iou(box(0, 0, 10, 10), box(10, 0, 20, 10)), 0.0);
}

TEST(BoxIou, SymmetricAndBounded) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int ax = rng.uniform_int(0, 40), ay = rng.uniform_int(0, 40);
    const int bx = rng.uniform_int(0, 40), by = rng.uniform_int(0, 40);
    const BBox a = box(ax, ay, ax + rng.uniform_int(1, 20), ay + rng.uniform_int(1, 20));
    const BBox b = box(bx, by, bx + rng.uniform_int(1, 20), by + rng.uniform_int(1, 20));
    const double iou = box_iou(a, b);
    ASSERT_EQ(iou, box_iou(b, a));
    ASSERT_GE(iou, 0.0);
    ASSERT_LE(iou, 1.0);
  }
}

TEST(BoxCiou, IdenticalBoxes) {
  const auto t = box_ciou(box(2, 3, 12, 30), box(2, 3, 12, 30));
  EXPECT_EQ(t.ciou, 1.0);
  EXPECT_EQ(t.iou, 1.0);
  EXPECT_EQ(t.center_dist_sq, 0.0);
  EXPECT_EQ(t.aspect_term, 0.0);
}

TEST(BoxCiou, TouchingSquaresTermByTerm) {
  const auto t = box_ciou(box(0, 0, 10, 10), box(10, 0, 20, 10));
  EXPECT_EQ(t.iou, 0.0);
  EXPECT_DOUBLE_EQ(t.center_dist_sq, 100.0);
  EXPECT_DOUBLE_EQ(t.enclosing_diag_sq, 500.0);
  EXPECT_EQ(t.aspect_term, 0.0);
  EXPECT_NEAR(t.ciou, -0.2, 1e-9);
}

TEST(BoxCiou, ConcentricSameAspectEqualsIou) {
  const auto u = box_ciou(box(10, 10, 30, 20), box(0, 5, 40, 25));
  EXPECT_EQ(u.center_dist_sq, 0.0);
  EXPECT_EQ(u.aspect_term, 0.0);
  EXPECT_EQ(u.ciou, u.iou);
  EXPECT_DOUBLE_EQ(u.iou, 0.25);
}

TEST(BoxCiou, RandomMatchesTermOracleAndNeverExceedsIou) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int ax = rng.uniform_int(0, 30), ay = rng.uniform_int(0, 30);
    const int bx = rng.uniform_int(0, 30), by = rng.uniform_int(0, 30);
    const BBox p = box(ax, ay, ax + rng.uniform_int(1, 25), ay + rng.uniform_int(1, 25));
    const BBox g = box(bx, by, bx + rng.uniform_int(1, 25), by + rng.uniform_int(1, 25));
    const auto t = box_ciou(p, g);
    const double rho2 = std::pow((p.x_min + p.x_max - g.x_min - g.x_max) / 2.0, 2) +
                        std::pow((p.y_min + p.y_max - g.y_min - g.y_max) / 2.0, 2);
    const double cw = std::max(p.x_max, g.x_max) - std::min(p.x_min, g.x_min);
    const double ch = std::max(p.y_max, g.y_max) - std::min(p.y_min, g.y_min);
    const double v = 4.0 / (std::numbers::pi * std::numbers::pi) *
                     std::pow(std::atan(g.width() / static_cast<double>(g.height())) -
                                  std::atan(p.width() / static_cast<double>(p.height())),
                              2);
    const double alpha = v / ((1.0 - t.iou) + v + 1e-9);
    ASSERT_NEAR(t.ciou, t.iou - rho2 / (cw * cw + ch * ch) - alpha * v, 1e-12);
    ASSERT_LE(t.ciou, t.iou);
    ASSERT_EQ(box_ciou(p, p).ciou, 1.0);
  }
}

TEST(AveragePrecision, Examples) {
  const std::vector<BBox> gt{box(0, 0, 10, 10)};
  for (double thr : kCocoIouThresholds) {
    const std::vector<BBox> exact{box(0, 0, 10, 10, 1.0)};
    EXPECT_EQ(average_precision(exact, gt, thr), 1.0);
  }
  const std::vector<BBox> fp_first{box(40, 40, 50, 50, 0.95), box(0, 0, 10, 10, 0.90)};
  EXPECT_NEAR(*average_precision(fp_first, gt, 0.5), 0.5, 1e-12);
  EXPECT_EQ(average_precision({}, gt, 0.5), 0.0);
  EXPECT_FALSE(average_precision({}, {}, 0.5).has_value());
  EXPECT_EQ(average_precision(fp_first, {}, 0.5), 0.0);
}

TEST(AveragePrecision, TiesKeepInsertionOrder) {
  const std::vector<BBox> gt{box(0, 0, 10, 10)};
  const std::vector<BBox> tp_first{box(0, 0, 10, 10, 0.5), box(40, 40, 50, 50, 0.5)};
  const std::vector<BBox> fp_first{box(40, 40, 50, 50, 0.5), box(0, 0, 10, 10, 0.5)};
  EXPECT_EQ(average_precision(tp_first, gt, 0.5), 1.0);
  EXPECT_NEAR(*average_precision(fp_first, gt, 0.5), 0.5, 1e-12);
}

TEST(AveragePrecision, MatchesBruteForceOnRandomSets) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BBox> gts, preds;
    const int ng = rng.uniform_int(1, 6);
    for (int i = 0; i < ng; ++i) {
      const int x = rng.uniform_int(0, 80), y = rng.uniform_int(0, 80);
      gts.push_back(box(x, y, x + rng.uniform_int(8, 30), y + rng.uniform_int(8, 30)));
    }
    for (const auto& g : gts) {
      if (rng.unit() < 0.8) {
        const int dx = rng.uniform_int(-5, 5), dy = rng.uniform_int(-5, 5);
        preds.push_back(box(std::max(0, g.x_min + dx), std::max(0, g.y_min + dy), g.x_max + dx, g.y_max + dy, rng.unit()));
      }
    }
    for (int i = rng.uniform_int(0, 3); i > 0; --i) {
      const int x = rng.uniform_int(0, 80), y = rng.uniform_int(0, 80);
      preds.push_back(box(x, y, x + 12, y + 12, rng.unit()));
    }
    for (double thr : kCocoIouThresholds) {
      ASSERT_NEAR(*average_precision(preds, gts, thr), brute_ap(preds, gts, thr), 1e-12) << "trial " << trial;
    }
  }
}

TEST(Map5095, OracleDetectionsScoreOne) {
  std::vector<std::vector<BBox>> gts{{box(0, 0, 20, 20, 1.0, 2), box(30, 30, 60, 50, 1.0, 0)}, {box(5, 5, 40, 30, 1.0, 0)}};
  const auto eval = map50_95(gts, gts, {"car", "bus", "truck"});
  EXPECT_EQ(eval.map50_95, 1.0);
  EXPECT_EQ(eval.precision, 1.0);
  EXPECT_EQ(eval.recall, 1.0);
  EXPECT_EQ(eval.ap.size(), 2u);
}

TEST(Map5095, ShiftedBoxesMatchBruteForce) {
  Rng rng(5);
  std::vector<std::vector<BBox>> gts(6), preds(6);
  for (int f = 0; f < 6; ++f) {
    for (int i = 0; i < 3; ++i) {
      const int x = 40 * i + rng.uniform_int(0, 5), y = rng.uniform_int(0, 100);
      gts[f].push_back(box(x, y, x + 32, y + 32));
      preds[f].push_back(box(x + 2, y + 2 * (i % 2), x + 34, y + 32 + 2 * (i % 2), 0.5 + 0.1 * i));
    }
  }
  const auto eval = map50_95(preds, gts, {"car"});
  const auto& aps = eval.ap.at(0);
  double mean = 0.0;
  for (std::size_t t = 0; t < kCocoIouThresholds.size(); ++t) {
    // single class: pooling equals one virtual image with frames offset apart
    std::vector<BBox> all_p, all_g;
    for (int f = 0; f < 6; ++f) {
      for (auto b : preds[f]) {
        b.x_min += 1000 * f;
        b.x_max += 1000 * f;
        all_p.push_back(b);
      }
      for (auto b : gts[f]) {
        b.x_min += 1000 * f;
        b.x_max += 1000 * f;
        all_g.push_back(b);
      }
    }
    const double want = brute_ap(all_p, all_g, kCocoIouThresholds[t]);
    EXPECT_NEAR(aps[t], want, 1e-6) << "threshold " << kCocoIouThresholds[t];
    mean += want / 10.0;
  }
  EXPECT_NEAR(eval.map50_95, mean, 1e-6);
  // stepwise: perfect at 0.5, nothing at 0.95
  EXPECT_EQ(aps.front(), 1.0);
  EXPECT_EQ(aps.back(), 0.0);
  EXPECT_TRUE(std::is_sorted(aps.rbegin(), aps.rend()));
}

TEST(Map5095, EmptyPredictionsScoreZero) {
  std::vector<std::vector<BBox>> gts{{box(0, 0, 20, 20)}};
  const auto eval = map50_95({{}}, gts, {"car"});
  EXPECT_EQ(eval.map50_95, 0.0);
  EXPECT_EQ(eval.recall, 0.0);
  EXPECT_THROW(map50_95({}, gts, {"car"}), ValidationError);
}

TEST(Map5095, InvariantUnderMonotoneConfidenceTransform) {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<BBox>> gts(3), preds(3);
    for (int f = 0; f < 3; ++f) {
      for (int i = rng.uniform_int(1, 4); i > 0; --i) {
        const int x = rng.uniform_int(0, 100), y = rng.uniform_int(0, 100);
        const int cls = rng.uniform_int(0, 1);
        gts[f].push_back(box(x, y, x + 20, y + 20, 1.0, cls));
        preds[f].push_back(box(x + rng.uniform_int(-4, 4) + 4, y + 4, x + 24, y + 24, rng.unit(), cls));
        if (rng.unit() < 0.4) preds[f].push_back(box(x + 50, y, x + 60, y + 10, rng.unit(), cls));
      }
    }
    auto warped = preds;
    for (auto& frame : warped) {
      for (auto& b : frame) b.confidence = std::exp(3.0 * b.confidence) - 7.0;
    }
    const auto a = map50_95(preds, gts, {"car", "bus"});
    const auto b = map50_95(warped, gts, {"car", "bus"}, -1e9);
    ASSERT_EQ(a.ap, b.ap);
    ASSERT_EQ(a.map50_95, b.map50_95);
  }
}

TEST(InpaintFidelity, ExactAndOffset) {
  Rng rng(1);
  const RasterImage clear = random_image(rng, 12, 10);
  const RasterMask hole = rect_mask(12, 10, 2, 2, 8, 7);
  const auto exact = inpaint_fidelity(clear, clear, hole);
  EXPECT_EQ(exact.l1_masked, 0.0);
  EXPECT_EQ(exact.psnr_masked, kPsnrCap);
  RasterImage dark = clear;
  for (auto& v : dark.bytes()) v = static_cast<std::uint8_t>(std::min(100, static_cast<int>(v)));
  RasterImage lifted = dark;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 12; ++x) {
      if (hole.at(x, y) != kPositive) continue;
      for (int c = 0; c < 3; ++c) lifted.at(x, y, c) = static_cast<std::uint8_t>(dark.at(x, y, c) + 10);
    }
  }
  const auto off = inpaint_fidelity(lifted, dark, hole);
  EXPECT_EQ(off.l1_masked, 10.0);
  EXPECT_NEAR(off.psnr_masked, 10.0 * std::log10(255.0 * 255.0 / 100.0), 1e-9);
}

TEST(InpaintFidelity, MatchesBruteForceAndValidates) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const RasterImage a = random_image(rng, 9, 7);
    const RasterImage b = random_image(rng, 9, 7);
    RasterMask hole = random_mask(rng, 9, 7, 0.5);
    hole.at(0, 0) = kPositive;
    double abs_sum = 0.0, sq = 0.0;
    int n = 0;
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 9; ++x) {
        if (hole.at(x, y) != kPositive) continue;
        for (int c = 0; c < 3; ++c) {
          const double d = a.at(x, y, c) - b.at(x, y, c);
          abs_sum += std::abs(d);
          sq += d * d;
          ++n;
        }
      }
    }
    const auto s = inpaint_fidelity(a, b, hole);
    ASSERT_NEAR(s.l1_masked, abs_sum / n, 1e-12);
    const double mse = sq / n;
    ASSERT_NEAR(s.psnr_masked, mse == 0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse)), 1e-9);
  }
  Rng r2(0);
  const RasterImage img = random_image(r2, 4, 4);
  EXPECT_THROW(inpaint_fidelity(img, img, RasterMask(4, 4)), ValidationError);
  EXPECT_THROW(inpaint_fidelity(img, random_image(r2, 4, 5), RasterMask(4, 4, kPositive)), ValidationError);
}
