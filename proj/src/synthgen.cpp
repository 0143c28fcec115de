#include "occlane/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "occlane/image_io.hpp"
#include "occlane/rng.hpp"

namespace occlane {

namespace fs = std::filesystem;

namespace {

constexpr int kRoiSamples = 12;

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// x(y) = x_bottom + slope * t + a * t^2 with t = y_bottom - y, expanded to
// x = a*y^2 + b*y + c.
LaneCurve lane_through(double x_bottom, double x_horizon, double a, double y_bottom, double y_horizon) {
  const double slope = (x_horizon - x_bottom) / (y_bottom - y_horizon);
  LaneCurve curve;
  curve.a = a;
  curve.b = -slope - 2.0 * a * y_bottom;
  curve.c = x_bottom + slope * y_bottom + a * y_bottom * y_bottom;
  return curve;
}

}  // namespace

void validate(const SceneParams& p) {
  if (p.width < 16 || p.height < 16) throw ParamError("scene must be at least 16x16");
  if (p.lane_count < 2 || p.lane_count > 5) throw ParamError("lane_count must be in [2, 5]");
  if (p.lane_stroke < 1) throw ParamError("lane_stroke must be >= 1");
  if (p.horizon_y < 0 || p.horizon_y >= p.height - 8) throw ParamError("horizon_y must lie above the bottom rows");
  if (p.curvature < 0.0) throw ParamError("curvature bound must be >= 0");
  auto level = [](int v) { return v >= 0 && v <= 255; };
  if (!level(p.road_brightness) || !level(p.lane_brightness)) throw ParamError("brightness outside 0..255");
  if (p.noise_sigma < 0.0 || p.noise_sigma > 255.0) throw ParamError("noise_sigma outside 0..255");
}

RasterMask render_lane_mask(const LaneModel& model, Size size, int stroke) {
  RasterMask out(size);
  const double half = stroke / 2.0;
  const int y0 = std::max(0, model.y_begin);
  const int y1 = std::min(size.height, model.y_end);
  for (int y = y0; y < y1; ++y) {
    std::uint8_t* row = out.row(y);
    for (const auto& lane : model.lanes) {
      const double xc = lane.x_at(y);
      const double lo_d = std::ceil(xc - half);
      const double hi_d = std::floor(xc + half);
      if (hi_d < 0.0 || lo_d > size.width - 1) continue;
      const int lo = static_cast<int>(std::max(lo_d, 0.0));
      const int hi = static_cast<int>(std::min(hi_d, static_cast<double>(size.width - 1)));
      for (int x = lo; x <= hi; ++x) row[x] = kPositive;
    }
  }
  return out;
}

Scene generate_scene(const SceneParams& p) {
  validate(p);
  Rng rng(p.seed);
  const double w = p.width;
  const double y_bottom = p.height - 1;
  const double y_horizon = p.horizon_y;

  const double spacing_bottom = 0.9 * w / p.lane_count;
  const double spacing_horizon = 0.45 * spacing_bottom;
  const double center_bottom = w / 2.0 + rng.uniform(-0.05, 0.05) * w;
  const double center_horizon = w / 2.0 + rng.uniform(-0.05, 0.05) * w;
  const double a = p.curvature > 0.0 ? rng.uniform(-p.curvature, p.curvature) : 0.0;

  Scene scene;
  scene.model.y_begin = p.horizon_y;
  scene.model.y_end = p.height;
  for (int i = 0; i < p.lane_count; ++i) {
    const double k = i - (p.lane_count - 1) / 2.0;
    scene.model.lanes.push_back(lane_through(center_bottom + k * spacing_bottom,
                                             center_horizon + k * spacing_horizon, a, y_bottom, y_horizon));
  }

  const double half = p.lane_stroke / 2.0;
  for (const auto& lane : scene.model.lanes) {
    for (int y = p.horizon_y; y < p.height; ++y) {
      const double x = lane.x_at(y);
      if (x - half < 0.0 || x + half > w - 1) {
        throw ParamError("lane leaves the frame at y=" + std::to_string(y) + " (reduce curvature or lane_count)");
      }
    }
  }

  // Road polygon: half a lane spacing outside the outermost lanes, following their curvature.
  const LaneCurve& left = scene.model.lanes.front();
  const LaneCurve& right = scene.model.lanes.back();
  auto margin_at = [&](double y) {
    const double t = (y_bottom - y) / (y_bottom - y_horizon);
    return 0.5 * (spacing_bottom + t * (spacing_horizon - spacing_bottom));
  };
  std::vector<Point2> right_side;
  for (int s = 0; s <= kRoiSamples; ++s) {
    const double y = p.height - (p.height - y_horizon) * s / kRoiSamples;
    const double m = margin_at(std::min(y, y_bottom));
    scene.road_roi.push_back(Point2{std::clamp(left.x_at(y) - m, 0.0, w), y});
    right_side.push_back(Point2{std::clamp(right.x_at(y) + m, 0.0, w), y});
  }
  scene.road_roi.insert(scene.road_roi.end(), right_side.rbegin(), right_side.rend());

  scene.lane_gt = render_lane_mask(scene.model, Size{p.width, p.height}, p.lane_stroke);
  const RasterMask road = polygon_mask(scene.road_roi, Size{p.width, p.height});

  scene.clear = RasterImage(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      double r, g, b;
      if (scene.lane_gt.at(x, y) == kPositive) {
        r = g = b = p.lane_brightness;
      } else if (road.at(x, y) == kPositive) {
        r = g = b = p.road_brightness;
      } else if (y < p.horizon_y) {
        r = 135;
        g = 170;
        b = 210;
      } else {
        r = 80;
        g = 100;
        b = 70;
      }
      const double n = p.noise_sigma * rng.normal();
      scene.clear.at(x, y, 0) = clamp_u8(r + n);
      scene.clear.at(x, y, 1) = clamp_u8(g + n);
      scene.clear.at(x, y, 2) = clamp_u8(b + n);
    }
  }
  return scene;
}

DatasetManifest generate_corpus(const SceneParams& params, int count, const fs::path& out_dir) {
  if (count < 1) throw ParamError("scene count must be >= 1");
  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (int i = 0; i < count; ++i) {
    SceneParams sp = params;
    sp.seed = derive_seed(params.seed, static_cast<std::uint64_t>(i)) & 0x7fffffffffffffffULL;
    const Scene scene = generate_scene(sp);
    char id[32];
    std::snprintf(id, sizeof id, "scene_%04d", i);
    FrameRecord f;
    f.id = id;
    f.clear_image = "frames/" + f.id + ".png";
    f.lane_mask = "masks/" + f.id + ".png";
    f.road_roi = scene.road_roi;
    f.seed = static_cast<std::int64_t>(sp.seed);
    f.source = "synthgen";
    save_raster(scene.clear, out_dir / f.clear_image);
    save_raster(scene.lane_gt, out_dir / f.lane_mask);
    manifest.frames.push_back(std::move(f));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace occlane
